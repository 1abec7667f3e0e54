#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <string_view>

namespace ouve {

// Convention for the circularly-symmetric complex unit Gaussian N_C(0, 1):
//   SplitHalf   — real/imag each N(0, 1/2), total variance 1 (default)
//   PerPartUnit — real/imag each N(0, 1), total variance 2
enum class NoiseConvention { SplitHalf, PerPartUnit };

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double normal() { return normal_(gen_); }
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform_(gen_);
    }
    std::uint64_t next_u64() { return gen_(); }

    std::complex<double> complex_normal(NoiseConvention conv) {
        const double s = (conv == NoiseConvention::SplitHalf) ? 0.7071067811865476 : 1.0;
        const double re = normal_(gen_);
        const double im = normal_(gen_);
        return {s * re, s * im};
    }

    std::mt19937_64& engine() { return gen_; }

  private:
    std::mt19937_64 gen_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ull);

// Named substream derived from a root seed; lets mix/train/solve reproduce
// independently from one --seed.
inline std::uint64_t substream_seed(std::uint64_t root_seed, std::string_view name) {
    std::uint64_t h = fnv1a64(name.data(), name.size());
    h ^= root_seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
}

inline Rng substream(std::uint64_t root_seed, std::string_view name) {
    return Rng(substream_seed(root_seed, name));
}

}  // namespace ouve
