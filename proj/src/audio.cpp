#include "ouve/audio.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "ouve/errors.hpp"

namespace ouve::audio {

namespace {

constexpr int kSampleRate = 16000;

double peak(const std::vector<double>& x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

void normalize_peak(std::vector<double>& x, double target) {
    const double m = peak(x);
    if (m > 0.0)
        for (double& v : x) v *= target / m;
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace

CleanKind parse_clean_kind(const std::string& s) {
    if (s == "harmonic") return CleanKind::Harmonic;
    if (s == "chirp") return CleanKind::Chirp;
    if (s == "speech") return CleanKind::SpeechSurrogate;
    throw DataError("unknown clean signal kind '" + s + "' (harmonic|chirp|speech)");
}

NoiseKind parse_noise_kind(const std::string& s) {
    if (s == "white") return NoiseKind::White;
    if (s == "pink") return NoiseKind::Pink;
    if (s == "babble") return NoiseKind::BabbleSurrogate;
    throw DataError("unknown noise kind '" + s + "' (white|pink|babble)");
}

namespace {

Waveform synth_harmonic(std::size_t n, Rng& rng) {
    Waveform w;
    w.samples.assign(n, 0.0);
    const double f0 = rng.uniform(90.0, 280.0);
    const int n_harm = 3 + static_cast<int>(rng.next_u64() % 6);  // 3..8
    const double f_env = rng.uniform(1.0, 4.0);
    const double phi_env = rng.uniform(0.0, 2.0 * std::numbers::pi);
    std::vector<double> phases(n_harm), amps(n_harm);
    for (int k = 0; k < n_harm; ++k) {
        phases[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        amps[k] = 1.0 / (k + 1);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / kSampleRate;
        double v = 0.0;
        for (int k = 0; k < n_harm; ++k)
            v += amps[k] * std::sin(2.0 * std::numbers::pi * f0 * (k + 1) * t + phases[k]);
        const double env = 0.55 + 0.45 * std::sin(2.0 * std::numbers::pi * f_env * t + phi_env);
        w.samples[i] = env * v;
    }
    return w;
}

Waveform synth_chirp(std::size_t n, Rng& rng) {
    Waveform w;
    w.samples.assign(n, 0.0);
    const double f_lo = rng.uniform(150.0, 400.0);
    const double f_hi = rng.uniform(2000.0, 5000.0);
    const double dur = static_cast<double>(n) / kSampleRate;
    const double rate = (f_hi - f_lo) / dur;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / kSampleRate;
        const double phase = 2.0 * std::numbers::pi * (f_lo * t + 0.5 * rate * t * t);
        w.samples[i] = std::sin(phase);
    }
    return w;
}

// Harmonic-rich glottal-like source through two slowly wandering resonators.
Waveform synth_speech_surrogate(std::size_t n, Rng& rng) {
    Waveform w;
    w.samples.assign(n, 0.0);
    const double f0 = rng.uniform(90.0, 220.0);
    std::vector<double> src(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / kSampleRate;
        double v = 0.0;
        for (int k = 1; k <= 20; ++k)
            v += std::sin(2.0 * std::numbers::pi * f0 * k * t) / k;
        src[i] = v;
    }
    // two formant-like resonators with independently drifting centers
    double state[2][2] = {{0, 0}, {0, 0}};
    const double fc_base[2] = {rng.uniform(350.0, 700.0), rng.uniform(1100.0, 2200.0)};
    const double drift_f[2] = {rng.uniform(0.3, 1.2), rng.uniform(0.3, 1.2)};
    const double drift_p[2] = {rng.uniform(0.0, 6.28), rng.uniform(0.0, 6.28)};
    const double bw = 120.0;
    const double r = std::exp(-std::numbers::pi * bw / kSampleRate);
    const double syll_f = rng.uniform(2.0, 5.0);
    const double syll_p = rng.uniform(0.0, 6.28);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / kSampleRate;
        double v = src[i];
        for (int j = 0; j < 2; ++j) {
            const double fc =
                fc_base[j] * (1.0 + 0.25 * std::sin(2.0 * std::numbers::pi * drift_f[j] * t +
                                                    drift_p[j]));
            const double theta = 2.0 * std::numbers::pi * fc / kSampleRate;
            const double a1 = 2.0 * r * std::cos(theta);
            const double a2 = -r * r;
            const double out = v + a1 * state[j][0] + a2 * state[j][1];
            state[j][1] = state[j][0];
            state[j][0] = out;
            v = out * (1.0 - r);
        }
        const double env =
            std::max(0.0, 0.4 + 0.6 * std::sin(2.0 * std::numbers::pi * syll_f * t + syll_p));
        w.samples[i] = env * v;
    }
    return w;
}

}  // namespace

Waveform synth_clean(CleanKind kind, double duration_s, std::uint64_t seed) {
    if (duration_s < 0.5) throw DataError("synth_clean: duration must be >= 0.5 s");
    const auto n = static_cast<std::size_t>(std::llround(duration_s * kSampleRate));
    Rng rng = substream(seed, "clean");
    Waveform w;
    switch (kind) {
        case CleanKind::Harmonic: w = synth_harmonic(n, rng); break;
        case CleanKind::Chirp: w = synth_chirp(n, rng); break;
        case CleanKind::SpeechSurrogate: w = synth_speech_surrogate(n, rng); break;
    }
    normalize_peak(w.samples, 0.9);
    return w;
}

Waveform synth_noise(NoiseKind kind, double duration_s, std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(std::llround(duration_s * kSampleRate));
    Rng rng = substream(seed, "noise");
    Waveform w;
    w.samples.assign(n, 0.0);
    switch (kind) {
        case NoiseKind::White:
            for (double& v : w.samples) v = rng.normal();
            break;
        case NoiseKind::Pink: {
            // FFT shaping: 1/sqrt(f) magnitude envelope over white noise
            const std::size_t m = next_pow2(n);
            std::vector<double> buf(m, 0.0);
            for (std::size_t i = 0; i < n; ++i) buf[i] = rng.normal();
            fftw_complex* spec = fftw_alloc_complex(m / 2 + 1);
            fftw_plan fwd = fftw_plan_dft_r2c_1d(static_cast<int>(m), buf.data(), spec,
                                                 FFTW_ESTIMATE);
            fftw_execute(fwd);
            for (std::size_t k = 1; k <= m / 2; ++k) {
                const double s = 1.0 / std::sqrt(static_cast<double>(k));
                spec[k][0] *= s;
                spec[k][1] *= s;
            }
            fftw_plan bwd = fftw_plan_dft_c2r_1d(static_cast<int>(m), spec, buf.data(),
                                                 FFTW_ESTIMATE);
            fftw_execute(bwd);
            for (std::size_t i = 0; i < n; ++i) w.samples[i] = buf[i] / static_cast<double>(m);
            fftw_destroy_plan(fwd);
            fftw_destroy_plan(bwd);
            fftw_free(spec);
            break;
        }
        case NoiseKind::BabbleSurrogate: {
            for (int v = 0; v < 6; ++v) {
                Waveform voice = synth_clean(CleanKind::SpeechSurrogate,
                                             std::max(duration_s, 0.5), rng.next_u64());
                for (std::size_t i = 0; i < n && i < voice.size(); ++i)
                    w.samples[i] += voice.samples[i];
            }
            break;
        }
    }
    // unit RMS so mix_at_snr scaling starts from a known level
    double e = 0.0;
    for (double v : w.samples) e += v * v;
    if (e > 0.0) {
        const double s = 1.0 / std::sqrt(e / static_cast<double>(n));
        for (double& v : w.samples) v *= s;
    }
    return w;
}

MixResult mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db_target) {
    if (clean.size() != noise.size())
        throw DataError("mix_at_snr: length mismatch (" + std::to_string(clean.size()) + " vs " +
                        std::to_string(noise.size()) + ")");
    if (!std::isfinite(snr_db_target)) throw DataError("mix_at_snr: non-finite target SNR");
    double e_clean = 0.0, e_noise = 0.0;
    for (double v : clean.samples) e_clean += v * v;
    for (double v : noise.samples) e_noise += v * v;
    if (e_clean == 0.0) throw DataError("mix_at_snr: zero clean signal");
    if (e_noise == 0.0) throw DataError("mix_at_snr: zero noise signal");

    const double scale = std::sqrt(e_clean / (e_noise * std::pow(10.0, snr_db_target / 10.0)));
    MixResult r;
    r.clean = clean;
    r.noise.samples.resize(noise.size());
    r.mixture.samples.resize(noise.size());
    for (std::size_t i = 0; i < noise.size(); ++i) {
        r.noise.samples[i] = scale * noise.samples[i];
        r.mixture.samples[i] = clean.samples[i] + r.noise.samples[i];
    }
    const double m = peak(r.mixture.samples);
    if (m > 0.99) {
        r.gain = 0.99 / m;
        for (std::size_t i = 0; i < noise.size(); ++i) {
            r.mixture.samples[i] *= r.gain;
            r.noise.samples[i] *= r.gain;
            r.clean.samples[i] *= r.gain;
        }
    }
    return r;
}

std::vector<double> convolve(const std::vector<double>& x, const std::vector<double>& h) {
    if (x.empty() || h.empty()) return {};
    const std::size_t out_len = x.size() + h.size() - 1;
    if (h.size() < 512) {
        std::vector<double> out(out_len, 0.0);
        for (std::size_t i = 0; i < x.size(); ++i)
            for (std::size_t j = 0; j < h.size(); ++j) out[i + j] += x[i] * h[j];
        return out;
    }
    const std::size_t m = next_pow2(out_len);
    std::vector<double> bx(m, 0.0), bh(m, 0.0);
    std::copy(x.begin(), x.end(), bx.begin());
    std::copy(h.begin(), h.end(), bh.begin());
    fftw_complex* sx = fftw_alloc_complex(m / 2 + 1);
    fftw_complex* sh = fftw_alloc_complex(m / 2 + 1);
    fftw_plan px = fftw_plan_dft_r2c_1d(static_cast<int>(m), bx.data(), sx, FFTW_ESTIMATE);
    fftw_plan ph = fftw_plan_dft_r2c_1d(static_cast<int>(m), bh.data(), sh, FFTW_ESTIMATE);
    fftw_execute(px);
    fftw_execute(ph);
    for (std::size_t k = 0; k <= m / 2; ++k) {
        const double re = sx[k][0] * sh[k][0] - sx[k][1] * sh[k][1];
        const double im = sx[k][0] * sh[k][1] + sx[k][1] * sh[k][0];
        sx[k][0] = re;
        sx[k][1] = im;
    }
    fftw_plan pb = fftw_plan_dft_c2r_1d(static_cast<int>(m), sx, bx.data(), FFTW_ESTIMATE);
    fftw_execute(pb);
    std::vector<double> out(out_len);
    for (std::size_t i = 0; i < out_len; ++i) out[i] = bx[i] / static_cast<double>(m);
    fftw_destroy_plan(px);
    fftw_destroy_plan(ph);
    fftw_destroy_plan(pb);
    fftw_free(sx);
    fftw_free(sh);
    return out;
}

std::vector<double> make_rir(const ReverbSpec& spec, int sample_rate) {
    if (!(spec.t60_s > 0.0)) throw DataError("make_rir: t60 must be positive");
    const double decay = 6.90775527898214 / spec.t60_s;  // ln(1e3): -60 dB at t60
    const auto len = static_cast<std::size_t>(std::llround(1.5 * spec.t60_s * sample_rate)) + 1;
    Rng rng = substream(spec.seed, "rir");
    std::vector<double> h(len, 0.0);
    h[0] = 1.0;  // direct path
    constexpr double tail_amp = 0.1;
    for (std::size_t n = 1; n < len; ++n) {
        const double t = static_cast<double>(n) / sample_rate;
        h[n] = tail_amp * rng.normal() * std::exp(-decay * t);
    }
    return h;
}

Waveform synth_reverb(const Waveform& clean, const ReverbSpec& spec) {
    const std::vector<double> h = make_rir(spec, clean.sample_rate);
    std::vector<double> full = convolve(clean.samples, h);
    Waveform out;
    out.sample_rate = clean.sample_rate;
    out.samples.assign(full.begin(), full.begin() + static_cast<long>(clean.size()));
    return out;
}

namespace {

std::uint32_t read_u32(std::istream& f) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& f) {
    unsigned char b[2];
    f.read(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

}  // namespace

Waveform read_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("read_wav: cannot open " + path);
    char tag[5] = {0};
    f.read(tag, 4);
    if (std::strncmp(tag, "RIFF", 4) != 0) throw DataError("read_wav: not a RIFF file: " + path);
    read_u32(f);  // riff size
    f.read(tag, 4);
    if (std::strncmp(tag, "WAVE", 4) != 0) throw DataError("read_wav: not a WAVE file: " + path);

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    std::vector<std::int16_t> pcm;

    while (f.read(tag, 4)) {
        const std::uint32_t chunk_size = read_u32(f);
        if (std::strncmp(tag, "fmt ", 4) == 0) {
            format = read_u16(f);
            channels = read_u16(f);
            rate = read_u32(f);
            read_u32(f);  // byte rate
            read_u16(f);  // block align
            bits = read_u16(f);
            if (chunk_size > 16) f.seekg(chunk_size - 16, std::ios::cur);
            have_fmt = true;
        } else if (std::strncmp(tag, "data", 4) == 0) {
            if (!have_fmt) throw DataError("read_wav: data chunk before fmt in " + path);
            if (format != 1)
                throw DataError("read_wav: " + path + ": format tag " + std::to_string(format) +
                                " is not PCM");
            if (channels != 1)
                throw DataError("read_wav: " + path + ": has " + std::to_string(channels) +
                                " channels, expected mono");
            if (rate != kSampleRate)
                throw DataError("read_wav: " + path + ": sample rate " + std::to_string(rate) +
                                " Hz, expected 16000 Hz");
            if (bits != 16)
                throw DataError("read_wav: " + path + ": " + std::to_string(bits) +
                                " bits per sample, expected 16");
            pcm.resize(chunk_size / 2);
            f.read(reinterpret_cast<char*>(pcm.data()), chunk_size);
            if (!f) throw DataError("read_wav: truncated data chunk in " + path);
            break;
        } else {
            f.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
        }
    }
    if (pcm.empty()) throw DataError("read_wav: no data chunk found in " + path);

    Waveform w;
    w.sample_rate = kSampleRate;
    w.samples.resize(pcm.size());
    for (std::size_t i = 0; i < pcm.size(); ++i) w.samples[i] = pcm[i] / 32768.0;
    return w;
}

void write_wav(const std::string& path, const Waveform& w) {
    if (w.sample_rate != kSampleRate)
        throw DataError("write_wav: sample rate must be 16000, got " +
                        std::to_string(w.sample_rate));
    bool clipped = false;
    std::vector<std::int16_t> pcm(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        double v = w.samples[i];
        if (v > 1.0 || v < -1.0) {
            clipped = true;
            v = std::clamp(v, -1.0, 1.0);
        }
        // Same 32768 scale as the reader, so a round trip only loses the
        // half-LSB quantization error.
        const long q = std::clamp(std::lround(v * 32768.0), -32768l, 32767l);
        pcm[i] = static_cast<std::int16_t>(q);
    }
    if (clipped)
        std::cerr << "write_wav: warning: samples clipped to [-1, 1] in " << path << "\n";

    const std::uint32_t data_size = static_cast<std::uint32_t>(pcm.size() * 2);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("write_wav: cannot open " + path);
    auto u32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
    auto u16 = [&](std::uint16_t v) { f.write(reinterpret_cast<const char*>(&v), 2); };
    f.write("RIFF", 4);
    u32(36 + data_size);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    u32(16);
    u16(1);  // PCM
    u16(1);  // mono
    u32(kSampleRate);
    u32(kSampleRate * 2);
    u16(2);
    u16(16);
    f.write("data", 4);
    u32(data_size);
    f.write(reinterpret_cast<const char*>(pcm.data()), data_size);
    if (!f) throw DataError("write_wav: write failed for " + path);
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("read_manifest: cannot open " + path);
    std::vector<ManifestEntry> out;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() < 5 || fields.size() > 6)
            throw DataError("read_manifest: " + path + ":" + std::to_string(lineno) +
                            ": expected seed,kind,snr_db,duration_s,t60_s[,noise_kind]");
        try {
            ManifestEntry e;
            e.seed = std::stoull(fields[0]);
            e.kind = parse_clean_kind(fields[1]);
            e.snr_db = std::stod(fields[2]);
            e.duration_s = std::stod(fields[3]);
            e.t60_s = std::stod(fields[4]);
            if (fields.size() == 6) e.noise_kind = parse_noise_kind(fields[5]);
            if (!(e.duration_s > 0.0))
                throw DataError("duration_s must be positive");
            if (e.t60_s != 0.0 && !(e.t60_s >= 0.1 && e.t60_s <= 2.0))
                throw DataError("t60_s must be 0 or within [0.1, 2.0]");
            out.push_back(e);
        } catch (const std::invalid_argument&) {
            throw DataError("read_manifest: " + path + ":" + std::to_string(lineno) +
                            ": malformed field");
        }
    }
    return out;
}

DatasetPair realize(const ManifestEntry& e) {
    DatasetPair pair;
    pair.clean = synth_clean(e.kind, e.duration_s, e.seed);
    Waveform dry = pair.clean;
    if (e.t60_s > 0.0) dry = synth_reverb(pair.clean, ReverbSpec{e.t60_s, e.seed + 1});
    const Waveform noise = synth_noise(e.noise_kind, e.duration_s, e.seed + 2);
    const MixResult mix = mix_at_snr(dry, noise, e.snr_db);
    pair.clean = mix.gain == 1.0 ? pair.clean : [&] {
        Waveform c = pair.clean;
        for (double& v : c.samples) v *= mix.gain;
        return c;
    }();
    pair.corrupted = mix.mixture;
    pair.interference.samples.resize(pair.corrupted.size());
    for (std::size_t i = 0; i < pair.corrupted.size(); ++i)
        pair.interference.samples[i] = pair.corrupted.samples[i] - pair.clean.samples[i];
    return pair;
}

}  // namespace ouve::audio
