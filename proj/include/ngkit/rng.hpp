#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>

namespace ngkit {

// splitmix64, used both as a generator and to derive independent substream
// seeds from (seed, label, indices). Fully portable: identical output on
// every platform, unlike std::normal_distribution.
class SplitMix64 {
public:
  explicit SplitMix64(uint64_t seed = 0) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return (next() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n)
  uint64_t below(uint64_t n) { return n ? next() % n : 0; }

  bool bernoulli(double p) { return uniform() < p; }

  // standard normal via Box-Muller (deterministic across platforms)
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

private:
  uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

inline uint64_t hash_mix(uint64_t a, uint64_t b) {
  SplitMix64 g(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
  return g.next();
}

// Derive the seed of an independent named substream. Streams keyed by
// the same (seed, label, a, b, c) always coincide; distinct keys are
// statistically independent.
inline uint64_t substream_seed(uint64_t seed, std::string_view label,
                               uint64_t a = 0, uint64_t b = 0, uint64_t c = 0) {
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the label
  for (char ch : label) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  h = hash_mix(seed, h);
  h = hash_mix(h, a);
  h = hash_mix(h, b);
  h = hash_mix(h, c);
  return h;
}

}  // namespace ngkit
