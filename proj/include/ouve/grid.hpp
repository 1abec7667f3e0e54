#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace ouve {

using cplx = std::complex<double>;

// Dense complex T-F grid, frame-major: index(bin, frame) = frame * rows + bin.
// rows is the number of frequency bins (F), cols the number of time frames.
// The `compressed` flag records whether the amplitude transform has been
// applied; the diffusion process lives in the compressed domain.
struct ComplexGrid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<cplx> data;
    bool compressed = false;

    ComplexGrid() = default;
    ComplexGrid(std::size_t r, std::size_t c)
        : rows(r), cols(c), data(r * c, cplx{0.0, 0.0}) {}

    std::size_t size() const { return data.size(); }

    cplx& at(std::size_t bin, std::size_t frame) { return data[frame * rows + bin]; }
    const cplx& at(std::size_t bin, std::size_t frame) const { return data[frame * rows + bin]; }

    bool same_shape(const ComplexGrid& o) const { return rows == o.rows && cols == o.cols; }
};

inline void require_same_shape(const ComplexGrid& a, const ComplexGrid& b, const char* where) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(where) + ": shape mismatch (" +
                                    std::to_string(a.rows) + "x" + std::to_string(a.cols) + " vs " +
                                    std::to_string(b.rows) + "x" + std::to_string(b.cols) + ")");
}

bool all_finite(const ComplexGrid& g);

// out = a + s * b
ComplexGrid axpy(const ComplexGrid& a, double s, const ComplexGrid& b);
// out = sa * a + sb * b
ComplexGrid lincomb(double sa, const ComplexGrid& a, double sb, const ComplexGrid& b);
ComplexGrid scaled(const ComplexGrid& a, double s);
ComplexGrid sub(const ComplexGrid& a, const ComplexGrid& b);

// L2 norm over concatenated real/imag components.
double l2_norm(const ComplexGrid& g);
double max_abs(const ComplexGrid& g);

}  // namespace ouve
