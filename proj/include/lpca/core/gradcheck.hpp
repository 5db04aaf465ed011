#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "lpca/core/rng.hpp"
#include "lpca/core/tensor.hpp"

namespace lpca {

struct GradcheckFailure {
  std::size_t tensor_index;
  std::size_t coordinate;
  std::string reason;
};

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t nonsmooth = 0;               // coordinates skipped by the kink test
  std::vector<GradcheckFailure> failures;  // non-finite evaluations

  bool ok(double tolerance) const { return failures.empty() && max_rel_error < tolerance; }
};

struct GradcheckOptions {
  double eps = 1e-5;
  // Coordinates sampled per call; 0 checks every coordinate of every tensor.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
  // When > 0, a coordinate whose central differences at eps and eps/2 differ
  // by more than this relative amount straddles a ReLU or max-pool kink; it is
  // counted in `nonsmooth` and left out of max_rel_error.
  double kink_tolerance = 0.0;
};

/// |a − n| / max(|a|, |n|, 1e-8).
inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
  return std::fabs(analytic - numeric) / denom;
}

/// Compares reverse-mode gradients of the scalar `loss()` with respect to each
/// tensor in `inputs` against central differences. Inputs are perturbed in
/// place and restored.
inline GradcheckResult gradcheck(const std::function<Tensor<double>()>& loss,
                                 std::vector<Tensor<double>> inputs, GradcheckOptions opts = {}) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.mutable_grad();
    t.zero_grad();
  }
  backward_of<double>(loss);

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t ti = 0; ti < inputs.size(); ++ti)
    for (std::size_t i = 0; i < inputs[ti].numel(); ++i) coords.emplace_back(ti, i);
  if (opts.max_coordinates != 0 && coords.size() > opts.max_coordinates) {
    Rng rng(opts.seed);
    for (std::size_t i = 0; i < opts.max_coordinates; ++i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                              static_cast<std::int64_t>(coords.size() - 1)));
      std::swap(coords[i], coords[j]);
    }
    coords.resize(opts.max_coordinates);
  }

  GradcheckResult result;
  NoGradScope<double> no_grad;
  for (const auto& [ti, i] : coords) {
    auto values = inputs[ti].mutable_data();
    const double original = values[i];
    auto central = [&](double eps) {
      values[i] = original + eps;
      const double plus = loss().item();
      values[i] = original - eps;
      const double minus = loss().item();
      values[i] = original;
      return (plus - minus) / (2.0 * eps);
    };
    ++result.checked;
    const double numeric = central(opts.eps);
    if (!std::isfinite(numeric)) {
      result.failures.push_back({ti, i, "non-finite loss at x +/- eps"});
      continue;
    }
    if (opts.kink_tolerance > 0.0 && relative_error(numeric, central(opts.eps / 2)) > opts.kink_tolerance) {
      ++result.nonsmooth;
      continue;
    }
    result.max_rel_error = std::max(result.max_rel_error, relative_error(inputs[ti].grad()[i], numeric));
  }
  return result;
}

/// Single-input form: checks d f(x) / dx.
inline GradcheckResult gradcheck(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                                 Tensor<double> x, double eps = 1e-5) {
  return gradcheck([&] { return f(x); }, {x}, GradcheckOptions{eps, 0, 0, 0.0});
}

}  // namespace lpca
