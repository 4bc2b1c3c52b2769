#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace schoolmerge {

// Deterministic seed tree. Every consumer of randomness takes a Stream (or an
// Rng made from one), so runs are reproducible bit-for-bit regardless of
// thread count or evaluation order: child streams are derived by hashing, not
// by consuming draws.
struct Stream {
  std::uint64_t key = 0;

  Stream child(std::uint64_t index) const;
  Stream child(std::string_view label) const;
};

// xoshiro256++ seeded via SplitMix64. All distributions are implemented here
// rather than taken from <random> because libstdc++/libc++ make different
// draws from the same engine; outputs feed frozen-value tests.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  explicit Rng(Stream s) : Rng(s.key) {}

  std::uint64_t next();

  // Uniform on the open interval (0,1); never returns an endpoint.
  double uniform01();
  double uniform(double lo, double hi);

  // Unbiased integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via inverse CDF.
  double normal();
  double normal(double mean, double sd);

  double exponential();  // rate 1

  // Fisher-Yates. Deterministic given the stream state.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::vector<std::int32_t> permutation(std::int32_t n);

 private:
  std::uint64_t s_[4];
};

// Draw from N(mean, 1) truncated to [lo, hi]. Bounds may be +-infinity.
// lo == hi returns that point; lo > hi throws NumericalError.
// Central intervals use the inverse CDF; tails beyond 5 sd use exponential
// rejection so extreme truncations stay exact.
double sample_truncated_normal(Rng& rng, double mean, double lo, double hi);

}  // namespace schoolmerge
