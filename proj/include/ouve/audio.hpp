#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ouve/rng.hpp"
#include "ouve/spectral.hpp"

namespace ouve::audio {

enum class CleanKind { Harmonic, Chirp, SpeechSurrogate };
enum class NoiseKind { White, Pink, BabbleSurrogate };

CleanKind parse_clean_kind(const std::string& s);
NoiseKind parse_noise_kind(const std::string& s);

// Deterministic synthetic clean signals, peak-normalized to 0.9.
Waveform synth_clean(CleanKind kind, double duration_s, std::uint64_t seed);

Waveform synth_noise(NoiseKind kind, double duration_s, std::uint64_t seed);

struct MixResult {
    Waveform mixture;
    Waveform noise;   // scaled (and jointly normalized) interference
    Waveform clean;   // same joint gain applied
    double gain = 1.0;
};

// Scale noise for an exact target SNR; if the mixture peaks above 0.99 all
// three signals get one common gain, which leaves the SNR untouched.
MixResult mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db);

struct ReverbSpec {
    double t60_s = 0.5;
    std::uint64_t seed = 0;
};

// Synthetic RIR: unit direct-path impulse plus an exponentially decaying
// white-noise tail (-60 dB at t60). Output trimmed to the input length.
Waveform synth_reverb(const Waveform& clean, const ReverbSpec& spec);
std::vector<double> make_rir(const ReverbSpec& spec, int sample_rate);

// Causal convolution, FFT-based for long kernels.
std::vector<double> convolve(const std::vector<double>& x, const std::vector<double>& h);

// RIFF PCM, 16-bit, mono, 16 kHz only; anything else is rejected with a
// message naming the offending property.
Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& w);

// Manifest line: seed,kind,snr_db,duration_s,t60_s
struct ManifestEntry {
    std::uint64_t seed = 0;
    CleanKind kind = CleanKind::Harmonic;
    NoiseKind noise_kind = NoiseKind::White;
    double snr_db = 5.0;
    double duration_s = 1.0;
    double t60_s = 0.0;  // 0 disables reverb
};

std::vector<ManifestEntry> read_manifest(const std::string& path);

struct DatasetPair {
    Waveform clean;
    Waveform corrupted;
    Waveform interference;  // corrupted - clean
};

// Fully seed-determined (clean, corrupted) pair for one manifest entry.
DatasetPair realize(const ManifestEntry& e);

}  // namespace ouve::audio
