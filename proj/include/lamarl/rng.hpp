#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace lamarl {

// Deterministic random source. std::mt19937_64 output is fixed by the
// standard; the distribution functions below are implemented here because
// the std::*_distribution classes are implementation-defined and would
// break reproducibility across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n >= 1. Rejection sampling, unbiased.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return v % n;
  }

  // Standard normal via Box-Muller. Two uniforms consumed per draw.
  double gaussian() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // k distinct indices drawn uniformly from [0, n), k <= n.
  // Floyd's algorithm followed by a shuffle-free sort-order pass is not
  // needed here; callers re-order results themselves.
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k) {
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t j = n - k; j < n; ++j) {
      const std::size_t t = static_cast<std::size_t>(uniform_index(j + 1));
      bool seen = false;
      for (std::size_t v : out) {
        if (v == t) {
          seen = true;
          break;
        }
      }
      out.push_back(seen ? j : t);
    }
    return out;
  }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

// Splits one master seed into independent per-component streams
// (env, exploration noise, batch sampler, parameter init).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return Rng::splitmix64(master ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
}

}  // namespace lamarl
