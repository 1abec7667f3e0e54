#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ouve/grid.hpp"
#include "ouve/rng.hpp"
#include "ouve/score.hpp"
#include "ouve/sde.hpp"
#include "ouve/spectral.hpp"

namespace ouve::sampler {

enum class SamplerKind { PC, ODE };

struct SamplerConfig {
    SamplerKind kind = SamplerKind::PC;
    int n_steps = 30;           // predictor steps (PC)
    int corrector_steps = 1;    // Langevin refinements per predictor step
    double snr_r = 0.5;         // Langevin step-size parameter
    double atol = 1e-6;
    double rtol = 1e-3;
    bool ode_half_factor = true;  // true: standard 1/2 g^2; false: full g^2
    std::uint64_t seed = 0;
    NoiseConvention noise_convention = NoiseConvention::SplitHalf;
    bool record_trace = false;
};

void validate(const SamplerConfig& cfg);

struct SolveStats {
    long nfe = 0;
    double wall_time_s = 0.0;
    double rtf = 0.0;  // wall_time / audio duration; filled by enhance()
    std::vector<std::pair<double, double>> step_trace;  // (t, ||x||)
};

// Euler-Maruyama step of the plug-in reverse SDE, marching from t to t - dt:
// x' = x + dt * (-drift + g(t)^2 s(x,y,t)) + g(t) sqrt(dt) z.
ComplexGrid em_predictor_step(const ComplexGrid& x, const ComplexGrid& y, double t, double dt,
                              const score::ScoreModel& model, const sde::SdeParams& p, Rng& rng,
                              NoiseConvention conv = NoiseConvention::SplitHalf);

// Annealed Langevin refinement: eps = 2 (r ||z|| / ||s||)^2,
// x' = x + eps * s + sqrt(2 eps) z. Zero score skips the step.
ComplexGrid langevin_corrector_step(const ComplexGrid& x, const ComplexGrid& y, double t, double r,
                                    const score::ScoreModel& model, const sde::SdeParams& p,
                                    Rng& rng, NoiseConvention conv = NoiseConvention::SplitHalf);

// Predictor-corrector solve from the prior at t = T down to t_eps in N equal
// steps; correctors run at the post-update time. NFE = N * (1 + corrector_steps).
std::pair<ComplexGrid, SolveStats> pc_solve(const ComplexGrid& y, const score::ScoreModel& model,
                                            const SamplerConfig& cfg, const sde::SdeParams& p);

// Probability-flow right-hand side in reverse time (d tau = -dt):
// -drift + (1/2) g^2 s  (half = true), or -drift + g^2 s (half = false).
ComplexGrid ode_rhs(const ComplexGrid& x, const ComplexGrid& y, double t,
                    const score::ScoreModel& model, const sde::SdeParams& p, bool half);

// Dormand-Prince 4(5) adaptive solve of the probability-flow ODE from T down
// to t_eps. Step acceptance: max component error <= atol + rtol * max|x|.
std::pair<ComplexGrid, SolveStats> rk45_solve(const ComplexGrid& y, const score::ScoreModel& model,
                                              const SamplerConfig& cfg, const sde::SdeParams& p);

// Closed-form probability-flow trajectory under the exact conditional score
// (half-factor variant): x_t = mu(t) + (sigma(t)/sigma(T)) * (x_T - mu(T)).
ComplexGrid closed_form_ode_solution(const ComplexGrid& x_T, const ComplexGrid& x0,
                                     const ComplexGrid& y, double t, const sde::SdeParams& p);

// Full enhancement pipeline: stft -> compress -> solve -> decompress -> istft.
// rtf is wall time of the solve loop over audio duration.
std::pair<Waveform, SolveStats> enhance(const Waveform& y_wave, const score::ScoreModel& model,
                                        const SamplerConfig& cfg, const sde::SdeParams& p,
                                        const spectral::TransformParams& tp);

}  // namespace ouve::sampler
