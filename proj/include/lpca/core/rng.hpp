#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace lpca {

/// Seeded generator with platform-independent draws. std::mt19937_64's output
/// sequence is fixed by the standard, but the std distributions are not, so the
/// conversions to real/integer/normal values are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [lo, hi], inclusive; rejection sampling keeps it unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return lo + static_cast<std::int64_t>(engine_());
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % span);
    std::uint64_t r = engine_();
    while (r >= limit) r = engine_();
    return lo + static_cast<std::int64_t>(r % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; the spare value is discarded to keep the stream position simple.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return mean + stddev * z;
  }

  // Derives an independent stream, e.g. one per sample or per epoch.
  Rng fork(std::uint64_t salt) {
    std::uint64_t s = engine_() ^ (salt * 0x9E3779B97F4A7C15ull);
    return Rng(s);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace lpca
