#include "ouve/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "ouve/errors.hpp"

namespace ouve::sampler {

namespace {

void check_finite(const ComplexGrid& x, double t) {
    if (!all_finite(x))
        throw NumericalError("solver diverged: non-finite state at t = " + std::to_string(t));
}

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace

void validate(const SamplerConfig& cfg) {
    if (cfg.kind == SamplerKind::PC) {
        if (cfg.n_steps < 1) throw std::invalid_argument("SamplerConfig: N must be >= 1");
        if (cfg.corrector_steps < 0)
            throw std::invalid_argument("SamplerConfig: corrector_steps must be >= 0");
        if (!(cfg.snr_r > 0.0)) throw std::invalid_argument("SamplerConfig: r must be positive");
    } else {
        if (!(cfg.atol > 0.0 && cfg.rtol > 0.0))
            throw std::invalid_argument("SamplerConfig: atol and rtol must be positive");
    }
}

ComplexGrid em_predictor_step(const ComplexGrid& x, const ComplexGrid& y, double t, double dt,
                              const score::ScoreModel& model, const sde::SdeParams& p, Rng& rng,
                              NoiseConvention conv) {
    if (!(dt > 0.0)) throw std::invalid_argument("em_predictor_step: dt must be positive");
    if (t - dt < p.t_eps - 1e-12)
        throw std::invalid_argument("em_predictor_step: step past t_eps");
    const double g = sde::diffusion_coeff(t, p);
    const ComplexGrid s = model.evaluate(x, y, t);
    // x' = x + dt (-f + g^2 s) + g sqrt(dt) z, marching t -> t - dt
    ComplexGrid out = axpy(x, -dt, sde::drift(x, y, p));
    out = axpy(out, dt * g * g, s);
    if (g > 0.0) {
        const ComplexGrid z = sde::sample_complex_gaussian(x.rows, x.cols, 1.0, rng, conv);
        out = axpy(out, g * std::sqrt(dt), z);
    }
    out.compressed = x.compressed;
    check_finite(out, t - dt);
    return out;
}

ComplexGrid langevin_corrector_step(const ComplexGrid& x, const ComplexGrid& y, double t,
                                    double r, const score::ScoreModel& model,
                                    const sde::SdeParams& p, Rng& rng, NoiseConvention conv) {
    if (!(r > 0.0)) throw std::invalid_argument("langevin_corrector_step: r must be positive");
    (void)p;
    const ComplexGrid s = model.evaluate(x, y, t);
    const double s_norm = l2_norm(s);
    if (s_norm == 0.0) return x;  // degenerate score: skip unchanged
    const ComplexGrid z = sde::sample_complex_gaussian(x.rows, x.cols, 1.0, rng, conv);
    const double z_norm = l2_norm(z);
    const double ratio = r * z_norm / s_norm;
    const double eps = 2.0 * ratio * ratio;
    ComplexGrid out = axpy(axpy(x, eps, s), std::sqrt(2.0 * eps), z);
    out.compressed = x.compressed;
    check_finite(out, t);
    return out;
}

std::pair<ComplexGrid, SolveStats> pc_solve(const ComplexGrid& y, const score::ScoreModel& model,
                                            const SamplerConfig& cfg, const sde::SdeParams& p) {
    validate(cfg);
    if (cfg.kind != SamplerKind::PC) throw std::invalid_argument("pc_solve: cfg.kind != pc");
    sde::validate(p);

    Rng rng = substream(cfg.seed, "solve");
    const long nfe_before = model.nfe();
    const double t0 = now_s();

    ComplexGrid x = sde::sample_prior(y, p, rng, cfg.noise_convention);
    const int N = cfg.n_steps;
    const double dt = (p.t_horizon - p.t_eps) / N;

    SolveStats stats;
    double last_good_t = p.t_horizon;
    try {
        for (int i = 1; i <= N; ++i) {
            const double t_prev = p.t_horizon - (i - 1) * dt;
            const double t_new = p.t_horizon - i * dt;
            x = em_predictor_step(x, y, t_prev, dt, model, p, rng, cfg.noise_convention);
            for (int j = 0; j < cfg.corrector_steps; ++j)
                x = langevin_corrector_step(x, y, t_new, cfg.snr_r, model, p, rng,
                                            cfg.noise_convention);
            last_good_t = t_new;
            if (cfg.record_trace) stats.step_trace.emplace_back(t_new, l2_norm(x));
        }
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " (last valid t = " +
                             std::to_string(last_good_t) + ")");
    }

    stats.wall_time_s = now_s() - t0;
    stats.nfe = model.nfe() - nfe_before;
    return {std::move(x), stats};
}

ComplexGrid ode_rhs(const ComplexGrid& x, const ComplexGrid& y, double t,
                    const score::ScoreModel& model, const sde::SdeParams& p, bool half) {
    const double g = sde::diffusion_coeff(t, p);
    const double factor = (half ? 0.5 : 1.0) * g * g;
    ComplexGrid out = scaled(sde::drift(x, y, p), -1.0);
    out = axpy(out, factor, model.evaluate(x, y, t));
    out.compressed = x.compressed;
    return out;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double A21 = 1.0 / 5.0;
constexpr double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0;
constexpr double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0;
constexpr double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0, A53 = 64448.0 / 6561.0,
                 A54 = -212.0 / 729.0;
constexpr double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0, A63 = 46732.0 / 5247.0,
                 A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0;
constexpr double B1 = 35.0 / 384.0, B3 = 500.0 / 1113.0, B4 = 125.0 / 192.0,
                 B5 = -2187.0 / 6784.0, B6 = 11.0 / 84.0;
// 4th-order weights for the error estimate
constexpr double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0,
                 E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0;
constexpr double C2 = 1.0 / 5.0, C3 = 3.0 / 10.0, C4 = 4.0 / 5.0, C5 = 8.0 / 9.0;

}  // namespace

std::pair<ComplexGrid, SolveStats> rk45_solve(const ComplexGrid& y, const score::ScoreModel& model,
                                              const SamplerConfig& cfg, const sde::SdeParams& p) {
    validate(cfg);
    if (cfg.kind != SamplerKind::ODE) throw std::invalid_argument("rk45_solve: cfg.kind != ode");
    sde::validate(p);

    Rng rng = substream(cfg.seed, "solve");
    const long nfe_before = model.nfe();
    const double t0_wall = now_s();

    // March forward in tau = T - t so the step is positive throughout.
    const double tau_end = p.t_horizon - p.t_eps;
    auto rhs = [&](const ComplexGrid& x, double tau) {
        return ode_rhs(x, y, p.t_horizon - tau, model, p, cfg.ode_half_factor);
    };

    ComplexGrid x = sde::sample_prior(y, p, rng, cfg.noise_convention);
    SolveStats stats;

    double tau = 0.0;
    double h = tau_end / 100.0;
    ComplexGrid k1 = rhs(x, tau);  // FSAL: reused across attempts and steps

    while (tau < tau_end) {
        h = std::min(h, tau_end - tau);
        if (h < 1e-14)
            throw NumericalError("rk45_solve: step size underflow at t = " +
                                 std::to_string(p.t_horizon - tau));

        const ComplexGrid k2 = rhs(axpy(x, h * A21, k1), tau + C2 * h);
        ComplexGrid xs = axpy(axpy(x, h * A31, k1), h * A32, k2);
        const ComplexGrid k3 = rhs(xs, tau + C3 * h);
        xs = axpy(axpy(axpy(x, h * A41, k1), h * A42, k2), h * A43, k3);
        const ComplexGrid k4 = rhs(xs, tau + C4 * h);
        xs = axpy(axpy(axpy(axpy(x, h * A51, k1), h * A52, k2), h * A53, k3), h * A54, k4);
        const ComplexGrid k5 = rhs(xs, tau + C5 * h);
        xs = axpy(axpy(axpy(axpy(axpy(x, h * A61, k1), h * A62, k2), h * A63, k3), h * A64, k4),
                  h * A65, k5);
        const ComplexGrid k6 = rhs(xs, tau + h);

        ComplexGrid x5 = axpy(axpy(axpy(axpy(axpy(x, h * B1, k1), h * B3, k3), h * B4, k4),
                                   h * B5, k5),
                              h * B6, k6);
        const ComplexGrid k7 = rhs(x5, tau + h);

        // err = h * sum(e_i k_i), component-wise magnitude
        ComplexGrid err = axpy(axpy(axpy(axpy(axpy(scaled(k1, h * E1), h * E3, k3), h * E4, k4),
                                         h * E5, k5),
                                    h * E6, k6),
                               h * E7, k7);

        const double tol = cfg.atol + cfg.rtol * max_abs(x);
        double err_max = 0.0;
        for (const cplx& c : err.data) err_max = std::max(err_max, std::abs(c));

        // Error-per-unit-step control: each step's local error is budgeted in
        // proportion to the time it covers, so the accumulated terminal error
        // stays near tol/2 no matter how many steps the solve takes.
        const double density = tol / (2.0 * tau_end);
        const double ratio = err_max / (density * h);

        if (ratio <= 1.0) {
            tau += h;
            x = std::move(x5);
            k1 = k7;  // FSAL
            check_finite(x, p.t_horizon - tau);
            if (cfg.record_trace) stats.step_trace.emplace_back(p.t_horizon - tau, l2_norm(x));
        }
        // err/h scales like h^4 for a 5th-order step, hence the 1/4 exponent.
        const double factor = ratio > 0.0 ? 0.9 * std::pow(1.0 / ratio, 0.25) : 5.0;
        h *= std::clamp(factor, 0.2, 5.0);
    }

    stats.wall_time_s = now_s() - t0_wall;
    stats.nfe = model.nfe() - nfe_before;
    x.compressed = y.compressed;
    return {std::move(x), stats};
}

ComplexGrid closed_form_ode_solution(const ComplexGrid& x_T, const ComplexGrid& x0,
                                     const ComplexGrid& y, double t, const sde::SdeParams& p) {
    if (!(t >= p.t_eps && t <= p.t_horizon))
        throw std::invalid_argument("closed_form_ode_solution: t outside [t_eps, T]");
    const ComplexGrid mu_t = sde::mean(x0, y, t, p);
    const ComplexGrid mu_T = sde::mean(x0, y, p.t_horizon, p);
    const double scale = sde::std_dev(t, p) / sde::std_dev(p.t_horizon, p);
    return axpy(mu_t, scale, sub(x_T, mu_T));
}

std::pair<Waveform, SolveStats> enhance(const Waveform& y_wave, const score::ScoreModel& model,
                                        const SamplerConfig& cfg, const sde::SdeParams& p,
                                        const spectral::TransformParams& tp) {
    const ComplexGrid y = spectral::compress(spectral::stft(y_wave), tp);
    auto [x, stats] = cfg.kind == SamplerKind::PC ? pc_solve(y, model, cfg, p)
                                                  : rk45_solve(y, model, cfg, p);
    Waveform out = spectral::istft(spectral::decompress(x, tp), y_wave.size());
    stats.rtf = stats.wall_time_s / y_wave.duration_s();
    return {std::move(out), stats};
}

}  // namespace ouve::sampler
