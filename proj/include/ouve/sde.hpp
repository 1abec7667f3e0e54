#pragma once

#include <utility>
#include <vector>

#include "ouve/grid.hpp"
#include "ouve/rng.hpp"
#include "ouve/spectral.hpp"

namespace ouve::sde {

// Forward process: dx = gamma * (y - x) dt + g(t) dw, an OU drift toward the
// corrupted signal combined with a variance-exploding noise schedule.
struct SdeParams {
    double gamma = 1.5;
    double sigma_min = 0.05;
    double sigma_max = 0.5;
    double t_horizon = 1.0;
    double t_eps = 0.03;
};

void validate(const SdeParams& p);

ComplexGrid drift(const ComplexGrid& x, const ComplexGrid& y, const SdeParams& p);

// g(t) = sigma_min * (sigma_max/sigma_min)^t * sqrt(2 ln(sigma_max/sigma_min))
double diffusion_coeff(double t, const SdeParams& p);

// mu(t) = e^{-gamma t} x0 + (1 - e^{-gamma t}) y
ComplexGrid mean(const ComplexGrid& x0, const ComplexGrid& y, double t, const SdeParams& p);

// sigma(t)^2 = sigma_min^2 ((sigma_max/sigma_min)^{2t} - e^{-2 gamma t})
//              * ln(sigma_max/sigma_min) / (gamma + ln(sigma_max/sigma_min))
double variance(double t, const SdeParams& p);
double std_dev(double t, const SdeParams& p);

ComplexGrid sample_complex_gaussian(std::size_t rows, std::size_t cols, double scale,
                                    Rng& rng, NoiseConvention conv);

struct Perturbed {
    ComplexGrid x_t;
    ComplexGrid z;  // the unit draw, kept for the loss target -z/sigma(t)
};

Perturbed perturb(const ComplexGrid& x0, const ComplexGrid& y, double t, const SdeParams& p,
                  Rng& rng, NoiseConvention conv = NoiseConvention::SplitHalf);

// x_T = y + sigma(T) * z — the strongly corrupted reverse-process start.
ComplexGrid sample_prior(const ComplexGrid& y, const SdeParams& p, Rng& rng,
                         NoiseConvention conv = NoiseConvention::SplitHalf);

// Exact score of the perturbation kernel: -(x_t - mu) / sigma(t)^2.
ComplexGrid kernel_score(const ComplexGrid& x_t, const ComplexGrid& x0, const ComplexGrid& y,
                         double t, const SdeParams& p);

struct SnrPoint {
    double t;
    double snr_db;
};

// Time-domain SNR of the process mean: speech power of x0 against the
// inverse-transformed residual, scaled by (1 - e^{-gamma t}) after inversion.
// t = 0 is capped at +99 dB.
std::vector<SnrPoint> snr_of_mean(const Waveform& x0, const Waveform& y,
                                  const std::vector<double>& t_grid, const SdeParams& p,
                                  const spectral::TransformParams& tp);

}  // namespace ouve::sde
