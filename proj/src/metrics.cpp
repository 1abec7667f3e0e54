#include "ouve/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "ouve/errors.hpp"

namespace ouve::metrics {

namespace {

void check_lengths(const Waveform& a, const Waveform& b, const char* where) {
    if (a.size() != b.size())
        throw DataError(std::string(where) + ": length mismatch (" + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()) + ")");
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double energy(const std::vector<double>& a) { return dot(a, a); }

double ratio_db(double num, double den) {
    if (den <= 0.0) return kDbCap;
    if (num <= 0.0) return -kDbCap;
    return std::clamp(10.0 * std::log10(num / den), -kDbCap, kDbCap);
}

}  // namespace

double si_sdr(const Waveform& est, const Waveform& ref) {
    check_lengths(est, ref, "si_sdr");
    const double ref_e = energy(ref.samples);
    if (ref_e == 0.0) throw DataError("si_sdr: zero reference");
    const double alpha = dot(est.samples, ref.samples) / ref_e;
    double target_e = 0.0, resid_e = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        const double ti = alpha * ref.samples[i];
        target_e += ti * ti;
        const double ri = ti - est.samples[i];
        resid_e += ri * ri;
    }
    return ratio_db(target_e, resid_e);
}

SirSar si_sir_sar(const Waveform& est, const Waveform& ref, const Waveform& noise) {
    check_lengths(est, ref, "si_sir_sar");
    check_lengths(est, noise, "si_sir_sar");
    const std::size_t n = est.size();
    const double ref_e = energy(ref.samples);
    if (ref_e == 0.0) throw DataError("si_sir_sar: zero reference");

    const double alpha = dot(est.samples, ref.samples) / ref_e;
    std::vector<double> e_target(n), resid(n);
    for (std::size_t i = 0; i < n; ++i) {
        e_target[i] = alpha * ref.samples[i];
        resid[i] = est.samples[i] - e_target[i];
    }

    // orthogonalize the noise reference against ref so the split is unique
    const double beta = dot(noise.samples, ref.samples) / ref_e;
    std::vector<double> n_orth(n);
    for (std::size_t i = 0; i < n; ++i) n_orth[i] = noise.samples[i] - beta * ref.samples[i];
    const double n_orth_e = energy(n_orth);
    if (n_orth_e == 0.0) throw DataError("si_sir_sar: noise reference degenerate (parallel to ref)");

    const double c = dot(resid, n_orth) / n_orth_e;
    double interf_e = 0.0, artif_e = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ei = c * n_orth[i];
        interf_e += ei * ei;
        const double ai = resid[i] - ei;
        artif_e += ai * ai;
    }
    const double target_e = energy(e_target);
    return {ratio_db(target_e, interf_e), ratio_db(target_e, artif_e)};
}

double snr_db(const Waveform& signal, const Waveform& noise) {
    check_lengths(signal, noise, "snr_db");
    const double noise_e = energy(noise.samples);
    if (noise_e == 0.0) throw DataError("snr_db: zero noise reference");
    return 10.0 * std::log10(energy(signal.samples) / noise_e);
}

MetricReport report(const Waveform& est, const Waveform& ref, const Waveform* noise) {
    MetricReport r{};
    r.si_sdr = si_sdr(est, ref);
    Waveform resid;
    resid.samples.resize(est.size());
    for (std::size_t i = 0; i < est.size(); ++i)
        resid.samples[i] = est.samples[i] - ref.samples[i];
    const double resid_e = energy(resid.samples);
    r.snr = resid_e > 0.0 ? snr_db(ref, resid) : kDbCap;
    if (noise != nullptr) {
        const SirSar ss = si_sir_sar(est, ref, *noise);
        r.si_sir = ss.si_sir;
        r.si_sar = ss.si_sar;
    }
    return r;
}

}  // namespace ouve::metrics
