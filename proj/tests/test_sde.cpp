#include "doctest.h"

#include <cmath>

#include "ouve/audio.hpp"
#include "ouve/errors.hpp"
#include "ouve/sde.hpp"

using namespace ouve;
using namespace ouve::sde;

namespace {

ComplexGrid scalar_grid(double re, double im = 0.0) {
    ComplexGrid g(1, 1);
    g.data[0] = cplx{re, im};
    return g;
}

}  // namespace

TEST_CASE("drift: fixed point, scalar value, linearity") {
    SdeParams p;
    const ComplexGrid x = scalar_grid(1.0);
    const ComplexGrid y = scalar_grid(0.0);
    CHECK(std::abs(drift(x, x, p).data[0]) == 0.0);
    CHECK(drift(x, y, p).data[0].real() == doctest::Approx(-1.5).epsilon(1e-14));

    const ComplexGrid xa = scalar_grid(0.3, -0.2), ya = scalar_grid(-0.1, 0.4);
    const cplx d1 = drift(xa, ya, p).data[0];
    const cplx d2 = drift(scaled(xa, 2.5), scaled(ya, 2.5), p).data[0];
    CHECK(std::abs(d2 - 2.5 * d1) < 1e-14);

    ComplexGrid bad(2, 2);
    CHECK_THROWS_AS(drift(x, bad, p), std::invalid_argument);
}

TEST_CASE("diffusion coefficient matches the noise schedule") {
    SdeParams p;
    CHECK(diffusion_coeff(0.0, p) == doctest::Approx(0.10729830131446736).epsilon(1e-12));
    CHECK(diffusion_coeff(1.0, p) == doctest::Approx(1.0729830131446736).epsilon(1e-12));
    double prev = 0.0;
    for (int i = 0; i <= 100; ++i) {
        const double g = diffusion_coeff(i / 100.0, p);
        CHECK(g > prev);
        prev = g;
    }
    CHECK_THROWS_AS(diffusion_coeff(-0.1, p), std::invalid_argument);
    CHECK_THROWS_AS(diffusion_coeff(1.1, p), std::invalid_argument);
}

TEST_CASE("mean: convex combination decaying from x0 to y") {
    SdeParams p;
    const ComplexGrid x0 = scalar_grid(1.0), y = scalar_grid(0.0);
    CHECK(mean(x0, y, 0.0, p).data[0].real() == 1.0);
    CHECK(mean(x0, y, 1.0, p).data[0].real() ==
          doctest::Approx(0.22313016014842983).epsilon(1e-12));
    for (double t : {0.1, 0.4, 0.9}) {
        const double w = std::exp(-p.gamma * t);
        CHECK(w + (1.0 - w) == doctest::Approx(1.0));
        CHECK(w > 0.0);
        CHECK(w < 1.0);
    }
}

TEST_CASE("std: zero at origin, frozen value at t=1, strictly increasing") {
    SdeParams p;
    CHECK(std_dev(0.0, p) == 0.0);
    CHECK(variance(1.0, p) == doctest::Approx(0.15130750838553110).epsilon(1e-10));
    CHECK(std_dev(1.0, p) == doctest::Approx(0.38898265820667520).epsilon(1e-10));
    double prev = variance(0.0, p);
    for (int i = 1; i <= 1000; ++i) {
        const double v = variance(i / 1000.0, p);
        CHECK(v > prev);
        prev = v;
    }
}

TEST_CASE("sample_complex_gaussian: moments under both conventions") {
    for (NoiseConvention conv : {NoiseConvention::SplitHalf, NoiseConvention::PerPartUnit}) {
        Rng rng(42);
        const std::size_t n = 1000000;
        ComplexGrid g = sample_complex_gaussian(n, 1, 1.0, rng, conv);
        double e2 = 0.0;
        cplx mean_acc{0.0, 0.0};
        for (const cplx& c : g.data) {
            e2 += std::norm(c);
            mean_acc += c;
        }
        e2 /= static_cast<double>(n);
        const double expected = conv == NoiseConvention::SplitHalf ? 1.0 : 2.0;
        CHECK(e2 == doctest::Approx(expected).epsilon(0.005));
        const double tol = 3.0 / std::sqrt(static_cast<double>(n));
        CHECK(std::abs(mean_acc.real() / n) < tol);
        CHECK(std::abs(mean_acc.imag() / n) < tol);
    }
    Rng rng(1);
    const ComplexGrid z = sample_complex_gaussian(8, 8, 0.0, rng, NoiseConvention::SplitHalf);
    for (const cplx& c : z.data) CHECK(std::abs(c) == 0.0);
}

TEST_CASE("perturb: empirical moments match the closed forms") {
    SdeParams p;
    const ComplexGrid x0 = scalar_grid(1.0), y = scalar_grid(0.0);
    const double t = 0.5;
    Rng rng(7);
    const int n = 10000;
    cplx sum{0, 0};
    double dev2 = 0.0;
    const cplx mu = mean(x0, y, t, p).data[0];
    for (int i = 0; i < n; ++i) {
        const Perturbed pt = perturb(x0, y, t, p, rng);
        sum += pt.x_t.data[0];
        dev2 += std::norm(pt.x_t.data[0] - mu);
    }
    const cplx emp_mean = sum / static_cast<double>(n);
    const double tol = 4.0 * std_dev(t, p) / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(emp_mean.real() - mu.real()) < tol);
    CHECK(std::abs(emp_mean.imag() - mu.imag()) < tol);
    CHECK(dev2 / n == doctest::Approx(variance(t, p)).epsilon(0.02));
}

TEST_CASE("perturb collapses toward x0 near t=0") {
    SdeParams p;
    const ComplexGrid x0 = scalar_grid(1.0), y = scalar_grid(0.0);
    Rng rng(3);
    const Perturbed pt = perturb(x0, y, p.t_eps, p, rng);
    CHECK(std::abs(pt.x_t.data[0] - x0.data[0]) < 0.2);
    CHECK(std::abs(mean(x0, y, p.t_eps, p).data[0] - x0.data[0]) < 0.05);
}

TEST_CASE("sample_prior: centered on y with variance sigma(T)^2") {
    SdeParams p;
    const ComplexGrid y = scalar_grid(0.4, -0.3);
    Rng rng(11);
    const int n = 10000;
    cplx sum{0, 0};
    double dev2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const ComplexGrid xT = sample_prior(y, p, rng);
        sum += xT.data[0];
        dev2 += std::norm(xT.data[0] - y.data[0]);
    }
    CHECK(dev2 / n == doctest::Approx(0.151308).epsilon(0.02));
    const double tol = 4.0 * std_dev(1.0, p) / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(sum.real() / n - y.data[0].real()) < tol);
    CHECK(std::abs(sum.imag() / n - y.data[0].imag()) < tol);
}

TEST_CASE("kernel_score: zero at the mean, exact -z/sigma form, scalar value") {
    SdeParams p;
    const ComplexGrid x0 = scalar_grid(1.0), y = scalar_grid(0.0);
    const double t = 0.6;
    const ComplexGrid mu = mean(x0, y, t, p);
    CHECK(std::abs(kernel_score(mu, x0, y, t, p).data[0]) == 0.0);

    Rng rng(5);
    const Perturbed pt = perturb(x0, y, t, p, rng);
    const cplx s = kernel_score(pt.x_t, x0, y, t, p).data[0];
    const cplx expected = -pt.z.data[0] / std_dev(t, p);
    CHECK(std::abs(s - expected) <= 1e-12 * std::abs(expected));

    // scalar: mu = 0, sigma = 0.5, x_t = 1 -> -4
    SdeParams q;
    q.gamma = 50.0;  // e^{-gamma} ~ 0: mean(x0=.., y=0, 1) ~ 0
    const ComplexGrid zero = scalar_grid(0.0);
    const double sigma2 = variance(1.0, q);
    (void)sigma2;
    const ComplexGrid xt = scalar_grid(1.0);
    const cplx v = kernel_score(xt, zero, zero, 1.0, q).data[0];
    CHECK(v.real() == doctest::Approx(-1.0 / variance(1.0, q)).epsilon(1e-12));

    CHECK_THROWS_AS(kernel_score(xt, zero, zero, 0.001, p), NumericalError);
}

TEST_CASE("prior mismatch norm equals e^{-gamma T} ||x0 - y||") {
    SdeParams p;
    const ComplexGrid x0 = scalar_grid(0.8, 0.1), y = scalar_grid(-0.2, 0.5);
    const ComplexGrid mu_T = mean(x0, y, p.t_horizon, p);
    const double lhs = l2_norm(sub(mu_T, y));
    const double rhs = std::exp(-p.gamma * p.t_horizon) * l2_norm(sub(x0, y));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("snr_of_mean: cap at t=0, approaches mixture SNR, monotone") {
    SdeParams p;
    const Waveform clean = audio::synth_clean(audio::CleanKind::Harmonic, 1.0, 101);
    const Waveform noise = audio::synth_noise(audio::NoiseKind::White, 1.0, 102);
    const audio::MixResult mix = audio::mix_at_snr(clean, noise, 5.0);

    std::vector<double> grid;
    for (int i = 0; i <= 50; ++i) grid.push_back(i / 50.0);
    const auto curve = snr_of_mean(mix.clean, mix.mixture, grid, p, spectral::TransformParams{});
    CHECK(curve.front().snr_db == doctest::Approx(99.0));
    for (std::size_t i = 1; i < curve.size(); ++i)
        CHECK(curve[i].snr_db <= curve[i - 1].snr_db + 1e-9);

    Waveform longer = mix.clean;
    longer.samples.push_back(0.0);
    CHECK_THROWS_AS(snr_of_mean(longer, mix.mixture, grid, p, spectral::TransformParams{}),
                    DataError);
}

TEST_CASE("SdeParams validation") {
    SdeParams p;
    p.gamma = -1.0;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
    p = SdeParams{};
    p.sigma_min = 0.6;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
    p = SdeParams{};
    p.t_eps = 2.0;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
}
