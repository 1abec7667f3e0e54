#pragma once

#include <cstddef>
#include <vector>

#include "ouve/grid.hpp"

namespace ouve {

// Mono PCM audio. The whole pipeline is fixed at 16 kHz.
struct Waveform {
    std::vector<double> samples;
    int sample_rate = 16000;

    std::size_t size() const { return samples.size(); }
    double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

namespace spectral {

// STFT geometry: periodic Hann, window 510, hop 128, F = 510/2 + 1 = 256.
inline constexpr std::size_t kWindowLength = 510;
inline constexpr std::size_t kHop = 128;
inline constexpr std::size_t kBins = kWindowLength / 2 + 1;

// Amplitude transform c -> beta * |c|^alpha * e^{i angle(c)}.
struct TransformParams {
    double alpha = 0.5;
    double beta = 0.15;
};

void validate(const TransformParams& p);

// Center-padded (reflection) analysis: T_frames = ceil(len / hop).
ComplexGrid stft(const Waveform& w);

// Overlap-add synthesis with window-squared normalization; exact inverse of
// stft up to float rounding. Input must not be compressed.
Waveform istft(const ComplexGrid& s, std::size_t target_len);

std::size_t num_frames(std::size_t len);

ComplexGrid compress(const ComplexGrid& s, const TransformParams& p);
ComplexGrid decompress(const ComplexGrid& s, const TransformParams& p);

}  // namespace spectral
}  // namespace ouve
