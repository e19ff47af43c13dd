#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace pmt::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// splitmix64 finalizer; the whole project draws randomness through it so
// every stream is a pure function of (key, counter).
inline std::uint64_t finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t hash2(std::uint64_t a, std::uint64_t b) {
  return finalize(finalize(a + kGolden) + b * kGolden);
}

inline std::uint64_t hash3(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return hash2(hash2(a, b), c);
}

// Stateful view over a counter-based stream: value(i) = finalize(key + i*golden).
class Stream {
public:
  explicit Stream(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return finalize(key_ + (++counter_) * kGolden); }

  // uniform in [0, 1)
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Box-Muller; one value per call, no caching so the stream stays counter-addressable.
  double gaussian() {
    double u1 = next_unit();
    double u2 = next_unit();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

  // unbiased enough for desk-scale shuffles; determinism is what matters
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(next_u64() % static_cast<std::uint64_t>(n));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    shuffle(p);
    return p;
  }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Stream tags: every consumer of randomness keys its stream with one of these
// so seeds never collide across purposes.
enum Purpose : std::uint64_t {
  kParamInit = 1,
  kTrainShuffle = 2,
  kIdentity = 3,
  kVariation = 4,
  kPairs = 5,
  kAugment = 6,
  kObfuscationInit = 7,
  kAttackInit = 8,
  kUpNoise = 9,
  kExperiment = 10,
};

inline Stream stream(std::uint64_t seed, Purpose purpose, std::uint64_t index = 0) {
  return Stream(hash3(seed, static_cast<std::uint64_t>(purpose), index));
}

}  // namespace pmt::rng
