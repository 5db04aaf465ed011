#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "lpca/core/rng.hpp"
#include "lpca/core/tensor.hpp"

namespace lpca::testing {

template <class T = double>
Tensor<T> random_tensor(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  std::vector<T> v(s.numel());
  for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return Tensor<T>(s, std::move(v));
}

// Values bounded away from zero, for checks across ReLU kinks.
inline Tensor<double> random_away_from_zero(Shape s, std::uint64_t seed, double margin = 1e-3) {
  Rng rng(seed);
  std::vector<double> v(s.numel());
  for (auto& x : v) {
    double u = rng.uniform(-1.0, 1.0);
    while (std::fabs(u) < margin) u = rng.uniform(-1.0, 1.0);
    x = u;
  }
  return Tensor<double>(s, std::move(v));
}

// Fixed random weights turn any tensor output into a well-conditioned scalar.
inline Tensor<double> weighted_sum(const Tensor<double>& y, std::uint64_t seed = 99);

}  // namespace lpca::testing

#include "lpca/core/ops.hpp"

namespace lpca::testing {
inline Tensor<double> weighted_sum(const Tensor<double>& y, std::uint64_t seed) {
  return sum_all(mul(y, random_tensor<double>(y.shape(), seed)));
}
}  // namespace lpca::testing
