#include "schoolmerge/rng.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "schoolmerge/errors.hpp"
#include "schoolmerge/stats.hpp"

namespace schoolmerge {

namespace {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t state = a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2));
  return splitmix64(state);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

Stream Stream::child(std::uint64_t index) const {
  return Stream{mix(key, index + 1)};
}

Stream Stream::child(std::string_view label) const {
  // FNV-1a over the label, mixed into the key.
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return Stream{mix(key, h)};
}

Rng::Rng(std::uint64_t seed) {
  std::uint64_t state = seed;
  for (auto& word : s_) word = splitmix64(state);
}

std::uint64_t Rng::next() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform01() {
  // 53 random bits, offset by half an ulp: strictly inside (0,1).
  return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw NumericalError("Rng::below requires n > 0");
  // Rejection to remove modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = next();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() { return norm_ppf(uniform01()); }

double Rng::normal(double mean, double sd) { return mean + sd * normal(); }

double Rng::exponential() { return -std::log(uniform01()); }

std::vector<std::int32_t> Rng::permutation(std::int32_t n) {
  std::vector<std::int32_t> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 0);
  shuffle(v);
  return v;
}

namespace {

constexpr double kTail = 5.0;

// Robert (1995): one-sided truncation to [a, inf) with a > 0.
double tail_sample(Rng& rng, double a) {
  const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double x = a + rng.exponential() / lambda;
    const double d = x - lambda;
    if (rng.uniform01() <= std::exp(-0.5 * d * d)) return x;
  }
}

double tail_sample_interval(Rng& rng, double a, double b) {
  for (;;) {
    const double x = tail_sample(rng, a);
    if (x <= b) return x;
  }
}

}  // namespace

double sample_truncated_normal(Rng& rng, double mean, double lo, double hi) {
  if (std::isnan(lo) || std::isnan(hi)) {
    throw NumericalError("truncated normal: NaN bound");
  }
  if (lo > hi) throw NumericalError("truncated normal: lo > hi");
  if (lo == hi) return lo;

  const double a = lo - mean;
  const double b = hi - mean;

  if (a == -std::numeric_limits<double>::infinity() &&
      b == std::numeric_limits<double>::infinity()) {
    return mean + rng.normal();
  }
  if (a >= kTail) {
    return mean + (std::isinf(b) ? tail_sample(rng, a)
                                 : tail_sample_interval(rng, a, b));
  }
  if (b <= -kTail) {
    return mean - (std::isinf(a) ? tail_sample(rng, -b)
                                 : tail_sample_interval(rng, -b, -a));
  }

  const double Fa = std::isinf(a) ? 0.0 : norm_cdf(a);
  const double Fb = std::isinf(b) ? 1.0 : norm_cdf(b);
  if (Fb - Fa < 1e-15) {
    // Numerically degenerate interval; both endpoints are finite here
    // because one of |a|, |b| < 5 and the mass between them underflowed.
    const double al = std::isinf(a) ? b : a;
    const double bl = std::isinf(b) ? a : b;
    return mean + 0.5 * (al + bl);
  }
  const double u = Fa + (Fb - Fa) * rng.uniform01();
  double z = norm_ppf(u);
  if (z < a) z = a;
  if (z > b) z = b;
  return mean + z;
}

}  // namespace schoolmerge
