#include "ouve/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>

#include "ouve/errors.hpp"

namespace ouve::spectral {

namespace {

// FFTW planning is not thread-safe; execution is.
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

std::vector<double> hann_periodic(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / n);
    return w;
}

// Reflection padding; pad_left/pad_right are < len for every valid input.
std::vector<double> reflect_pad(const std::vector<double>& x, std::size_t pad_left,
                                std::size_t pad_right) {
    std::vector<double> out(pad_left + x.size() + pad_right);
    for (std::size_t i = 0; i < pad_left; ++i) out[i] = x[pad_left - i];
    for (std::size_t i = 0; i < x.size(); ++i) out[pad_left + i] = x[i];
    for (std::size_t i = 0; i < pad_right; ++i)
        out[pad_left + x.size() + i] = x[x.size() - 2 - i];
    return out;
}

constexpr std::size_t kPadLeft = kWindowLength / 2;  // 255

}  // namespace

void validate(const TransformParams& p) {
    if (!(p.alpha > 0.0 && p.alpha <= 1.0))
        throw std::invalid_argument("TransformParams: alpha must be in (0, 1], got " +
                                    std::to_string(p.alpha));
    if (!(p.beta > 0.0))
        throw std::invalid_argument("TransformParams: beta must be positive, got " +
                                    std::to_string(p.beta));
}

std::size_t num_frames(std::size_t len) { return (len + kHop - 1) / kHop; }

ComplexGrid stft(const Waveform& w) {
    if (w.sample_rate != 16000)
        throw DataError("stft: sample rate must be 16000, got " + std::to_string(w.sample_rate));
    if (w.size() < kWindowLength)
        throw DataError("stft: input too short (" + std::to_string(w.size()) + " < " +
                        std::to_string(kWindowLength) + " samples)");
    for (double s : w.samples)
        if (!std::isfinite(s)) throw DataError("stft: non-finite sample in input");

    const std::size_t frames = num_frames(w.size());
    const std::size_t padded_len = (frames - 1) * kHop + kWindowLength;
    const std::size_t pad_right = padded_len - kPadLeft - w.size();
    const std::vector<double> padded = reflect_pad(w.samples, kPadLeft, pad_right);
    const std::vector<double> win = hann_periodic(kWindowLength);

    ComplexGrid out(kBins, frames);

    double* in = fftw_alloc_real(kWindowLength);
    fftw_complex* spec = fftw_alloc_complex(kBins);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(plan_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(kWindowLength), in, spec, FFTW_ESTIMATE);
    }

    for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t n = 0; n < kWindowLength; ++n)
            in[n] = padded[f * kHop + n] * win[n];
        fftw_execute(plan);
        for (std::size_t k = 0; k < kBins; ++k)
            out.at(k, f) = cplx{spec[k][0], spec[k][1]};
    }

    {
        std::lock_guard<std::mutex> lock(plan_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(spec);
    return out;
}

Waveform istft(const ComplexGrid& s, std::size_t target_len) {
    if (s.compressed) throw DataError("istft: input is compressed; decompress first");
    if (s.rows != kBins)
        throw DataError("istft: inconsistent frame geometry: expected " + std::to_string(kBins) +
                        " bins, got " + std::to_string(s.rows));
    const std::size_t frames = s.cols;
    const std::size_t padded_len = (frames - 1) * kHop + kWindowLength;
    if (kPadLeft + target_len > padded_len)
        throw DataError("istft: target length " + std::to_string(target_len) +
                        " exceeds synthesis span of " + std::to_string(frames) + " frames");

    const std::vector<double> win = hann_periodic(kWindowLength);
    std::vector<double> acc(padded_len, 0.0);
    std::vector<double> denom(padded_len, 0.0);

    fftw_complex* spec = fftw_alloc_complex(kBins);
    double* frame = fftw_alloc_real(kWindowLength);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(plan_mutex());
        plan = fftw_plan_dft_c2r_1d(static_cast<int>(kWindowLength), spec, frame, FFTW_ESTIMATE);
    }

    for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t k = 0; k < kBins; ++k) {
            spec[k][0] = s.at(k, f).real();
            spec[k][1] = s.at(k, f).imag();
        }
        fftw_execute(plan);
        for (std::size_t n = 0; n < kWindowLength; ++n) {
            const double v = frame[n] / static_cast<double>(kWindowLength);
            acc[f * kHop + n] += v * win[n];
            denom[f * kHop + n] += win[n] * win[n];
        }
    }

    {
        std::lock_guard<std::mutex> lock(plan_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(spec);
    fftw_free(frame);

    Waveform out;
    out.samples.resize(target_len, 0.0);
    for (std::size_t i = 0; i < target_len; ++i) {
        const std::size_t j = kPadLeft + i;
        out.samples[i] = denom[j] > 1e-12 ? acc[j] / denom[j] : 0.0;
    }
    return out;
}

ComplexGrid compress(const ComplexGrid& s, const TransformParams& p) {
    validate(p);
    if (s.compressed) throw DataError("compress: input already compressed");
    ComplexGrid out(s.rows, s.cols);
    out.compressed = true;
    for (std::size_t i = 0; i < s.data.size(); ++i) {
        const double m = std::abs(s.data[i]);
        // angle(0) := 0, so zero maps to zero
        out.data[i] = m == 0.0 ? cplx{0.0, 0.0}
                               : s.data[i] * (p.beta * std::pow(m, p.alpha) / m);
    }
    return out;
}

ComplexGrid decompress(const ComplexGrid& s, const TransformParams& p) {
    validate(p);
    if (!s.compressed) throw DataError("decompress: input is not compressed");
    ComplexGrid out(s.rows, s.cols);
    out.compressed = false;
    for (std::size_t i = 0; i < s.data.size(); ++i) {
        const double m = std::abs(s.data[i]);
        out.data[i] = m == 0.0 ? cplx{0.0, 0.0}
                               : s.data[i] * (std::pow(m / p.beta, 1.0 / p.alpha) / m);
    }
    return out;
}

}  // namespace ouve::spectral
