#include "ouve/sde.hpp"

#include <algorithm>
#include <cmath>

#include "ouve/errors.hpp"

namespace ouve::sde {

namespace {

void check_t(double t, const SdeParams& p, const char* where) {
    if (!(t >= 0.0 && t <= p.t_horizon))
        throw std::invalid_argument(std::string(where) + ": t = " + std::to_string(t) +
                                    " outside [0, " + std::to_string(p.t_horizon) + "]");
}

constexpr double kSnrCapDb = 99.0;

}  // namespace

void validate(const SdeParams& p) {
    if (!(p.gamma > 0.0)) throw std::invalid_argument("SdeParams: gamma must be positive");
    if (!(p.sigma_min > 0.0 && p.sigma_min < p.sigma_max))
        throw std::invalid_argument("SdeParams: need 0 < sigma_min < sigma_max");
    if (!(p.t_eps > 0.0 && p.t_eps < p.t_horizon))
        throw std::invalid_argument("SdeParams: need 0 < t_eps < t_horizon");
}

ComplexGrid drift(const ComplexGrid& x, const ComplexGrid& y, const SdeParams& p) {
    require_same_shape(x, y, "drift");
    return lincomb(-p.gamma, x, p.gamma, y);
}

double diffusion_coeff(double t, const SdeParams& p) {
    check_t(t, p, "diffusion_coeff");
    const double ratio = p.sigma_max / p.sigma_min;
    return p.sigma_min * std::pow(ratio, t) * std::sqrt(2.0 * std::log(ratio));
}

ComplexGrid mean(const ComplexGrid& x0, const ComplexGrid& y, double t, const SdeParams& p) {
    require_same_shape(x0, y, "mean");
    check_t(t, p, "mean");
    const double w = std::exp(-p.gamma * t);
    return lincomb(w, x0, 1.0 - w, y);
}

double variance(double t, const SdeParams& p) {
    check_t(t, p, "variance");
    const double logr = std::log(p.sigma_max / p.sigma_min);
    const double v = p.sigma_min * p.sigma_min *
                     (std::exp(2.0 * t * logr) - std::exp(-2.0 * p.gamma * t)) * logr /
                     (p.gamma + logr);
    return std::max(v, 0.0);
}

double std_dev(double t, const SdeParams& p) { return std::sqrt(variance(t, p)); }

ComplexGrid sample_complex_gaussian(std::size_t rows, std::size_t cols, double scale, Rng& rng,
                                    NoiseConvention conv) {
    if (scale < 0.0) throw std::invalid_argument("sample_complex_gaussian: negative scale");
    ComplexGrid out(rows, cols);
    if (scale == 0.0) return out;
    for (cplx& c : out.data) c = scale * rng.complex_normal(conv);
    return out;
}

Perturbed perturb(const ComplexGrid& x0, const ComplexGrid& y, double t, const SdeParams& p,
                  Rng& rng, NoiseConvention conv) {
    require_same_shape(x0, y, "perturb");
    check_t(t, p, "perturb");
    Perturbed out;
    out.z = sample_complex_gaussian(x0.rows, x0.cols, 1.0, rng, conv);
    out.x_t = axpy(mean(x0, y, t, p), std_dev(t, p), out.z);
    out.x_t.compressed = x0.compressed;
    return out;
}

ComplexGrid sample_prior(const ComplexGrid& y, const SdeParams& p, Rng& rng,
                         NoiseConvention conv) {
    ComplexGrid x_T = axpy(y, std_dev(p.t_horizon, p),
                           sample_complex_gaussian(y.rows, y.cols, 1.0, rng, conv));
    x_T.compressed = y.compressed;
    return x_T;
}

ComplexGrid kernel_score(const ComplexGrid& x_t, const ComplexGrid& x0, const ComplexGrid& y,
                         double t, const SdeParams& p) {
    if (t < p.t_eps)
        throw NumericalError("kernel_score: t = " + std::to_string(t) +
                             " below t_eps = " + std::to_string(p.t_eps));
    return scaled(sub(x_t, mean(x0, y, t, p)), -1.0 / variance(t, p));
}

std::vector<SnrPoint> snr_of_mean(const Waveform& x0, const Waveform& y,
                                  const std::vector<double>& t_grid, const SdeParams& p,
                                  const spectral::TransformParams& tp) {
    if (x0.size() != y.size())
        throw DataError("snr_of_mean: length mismatch (" + std::to_string(x0.size()) + " vs " +
                        std::to_string(y.size()) + ")");

    const ComplexGrid cx0 = spectral::compress(spectral::stft(x0), tp);
    const ComplexGrid cy = spectral::compress(spectral::stft(y), tp);
    ComplexGrid residual = sub(cy, cx0);
    residual.compressed = true;

    // Inverse-transform the residual once; the (1 - e^{-gamma t}) mean weight
    // scales it in the time domain.
    const Waveform noise_full = spectral::istft(spectral::decompress(residual, tp), x0.size());

    double p_speech = 0.0, p_noise_full = 0.0;
    for (double s : x0.samples) p_speech += s * s;
    for (double s : noise_full.samples) p_noise_full += s * s;

    std::vector<SnrPoint> out;
    out.reserve(t_grid.size());
    for (double t : t_grid) {
        check_t(t, p, "snr_of_mean");
        const double scale = 1.0 - std::exp(-p.gamma * t);
        const double p_noise = scale * scale * p_noise_full;
        double snr = p_noise > 0.0 ? 10.0 * std::log10(p_speech / p_noise) : kSnrCapDb;
        snr = std::min(snr, kSnrCapDb);
        out.push_back({t, snr});
    }
    return out;
}

}  // namespace ouve::sde
