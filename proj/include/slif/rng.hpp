#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace slif {

// splitmix64 finalizer; used to derive independent seed streams from a master
// seed so that, e.g., epoch-7 pruning never shares a stream with splitting.
inline uint64_t mix_seed(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t master, std::string_view stream, uint64_t index = 0) {
  uint64_t h = 1469598103934665603ULL;  // FNV-1a over the stream tag
  for (char c : stream) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return mix_seed(master ^ mix_seed(h) ^ mix_seed(index * 0xd6e8feb86659fd93ULL + 1));
}

// Thin wrapper over mt19937_64 with fixed value mappings. The standard
// distributions are implementation-defined, which would make frozen test
// values compiler-dependent; these mappings are pinned.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform integer in [0, bound), bound > 0. Rejection sampling, unbiased.
  uint64_t next_below(uint64_t bound) {
    const uint64_t limit = bound * (UINT64_MAX / bound);
    uint64_t v;
    do {
      v = gen_();
    } while (v >= limit);
    return v % bound;
  }

  // Uniform in [0, 1).
  double next_unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Standard normal via Box-Muller; one value per call, no caching.
  double next_gauss() {
    double u1;
    do {
      u1 = next_unit();
    } while (u1 <= 0.0);
    double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace slif
