#include "ouve/grid.hpp"

#include <algorithm>
#include <cmath>

namespace ouve {

bool all_finite(const ComplexGrid& g) {
    for (const cplx& c : g.data)
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) return false;
    return true;
}

ComplexGrid axpy(const ComplexGrid& a, double s, const ComplexGrid& b) {
    require_same_shape(a, b, "axpy");
    ComplexGrid out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += s * b.data[i];
    return out;
}

ComplexGrid lincomb(double sa, const ComplexGrid& a, double sb, const ComplexGrid& b) {
    require_same_shape(a, b, "lincomb");
    ComplexGrid out(a.rows, a.cols);
    out.compressed = a.compressed;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = sa * a.data[i] + sb * b.data[i];
    return out;
}

ComplexGrid scaled(const ComplexGrid& a, double s) {
    ComplexGrid out = a;
    for (cplx& c : out.data) c *= s;
    return out;
}

ComplexGrid sub(const ComplexGrid& a, const ComplexGrid& b) {
    require_same_shape(a, b, "sub");
    ComplexGrid out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
    return out;
}

double l2_norm(const ComplexGrid& g) {
    double acc = 0.0;
    for (const cplx& c : g.data) acc += std::norm(c);
    return std::sqrt(acc);
}

double max_abs(const ComplexGrid& g) {
    double m = 0.0;
    for (const cplx& c : g.data) m = std::max(m, std::abs(c));
    return m;
}

}  // namespace ouve
