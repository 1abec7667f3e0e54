#pragma once

#include <optional>

#include "ouve/spectral.hpp"

namespace ouve::metrics {

inline constexpr double kDbCap = 100.0;

// Scale-invariant SDR: project est onto ref, rate residual energy.
double si_sdr(const Waveform& est, const Waveform& ref);

struct SirSar {
    double si_sir;
    double si_sar;
};

// Projection decomposition est = e_target + e_interf + e_artif with the noise
// reference orthogonalized against ref, so the split is unique:
//   e_target = <est,ref>/||ref||^2 * ref
//   e_interf = projection of (est - e_target) onto (noise - proj_ref(noise))
//   e_artif  = remainder
SirSar si_sir_sar(const Waveform& est, const Waveform& ref, const Waveform& noise);

double snr_db(const Waveform& signal, const Waveform& noise);

struct MetricReport {
    double si_sdr;
    double snr;
    std::optional<double> si_sir;
    std::optional<double> si_sar;
};

MetricReport report(const Waveform& est, const Waveform& ref, const Waveform* noise = nullptr);

}  // namespace ouve::metrics
