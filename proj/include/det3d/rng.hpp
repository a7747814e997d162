#pragma once

#include <cstdint>
#include <vector>

namespace det3d {

/// Deterministic 64-bit generator (splitmix64 update). Every randomized
/// operation in this library takes one of these seeded explicitly, so runs
/// are reproducible bit-for-bit across platforms; std:: distributions are
/// avoided on purpose (their output is implementation-defined).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi). Returns lo when the range is empty.
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

  bool bernoulli(double p) { return uniform() < p; }

  /// Derives an independent child stream without advancing this one.
  /// Distinct tags give distinct streams for the same parent state.
  SplitMix64 split(std::uint64_t tag) const {
    SplitMix64 child(state_ ^ (0xD1B54A32D192ED03ull * (tag + 1)));
    child.next_u64();
    return child;
  }

  /// Fisher-Yates shuffle of an index vector, consuming this stream.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace det3d
