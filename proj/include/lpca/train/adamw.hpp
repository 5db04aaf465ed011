#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "lpca/layers/module.hpp"

namespace lpca {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

template <class T>
struct OptimState {
  std::vector<std::vector<T>> m, v;  // one pair per parameter
  std::size_t t = 0;
};

/// AdamW with decoupled weight decay: w ← w − lr·λ·w, then the
/// bias-corrected Adam update. Parameters without a gradient are skipped.
template <class T>
class AdamW {
 public:
  AdamW(std::vector<NamedTensor<T>> params, AdamWOptions options = {})
      : params_(std::move(params)), options_(options) {
    for (const auto& p : params_) {
      state_.m.emplace_back(p.tensor.numel(), T(0));
      state_.v.emplace_back(p.tensor.numel(), T(0));
    }
  }

  /// Applies one update at learning rate `lr`. Throws NumericError, leaving
  /// parameters and state untouched, if any gradient is not finite.
  void step(double lr) {
    for (const auto& p : params_) {
      if (!p.tensor.has_grad()) continue;
      for (T g : p.tensor.grad()) {
        if (!std::isfinite(static_cast<double>(g))) {
          throw NumericError("adamw: non-finite gradient in '" + p.name + "', step rejected");
        }
      }
    }
    ++state_.t;
    const double b1 = options_.beta1, b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state_.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state_.t));
    const double decay = lr * options_.weight_decay;
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor<T> w = params_[k].tensor;
      if (!w.has_grad()) continue;
      auto data = w.mutable_data();
      const auto grad = w.grad();
      auto& m = state_.m[k];
      auto& v = state_.v[k];
      for (std::size_t i = 0; i < data.size(); ++i) {
        const double g = static_cast<double>(grad[i]);
        double x = static_cast<double>(data[i]);
        x -= decay * x;
        const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * g;
        const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        x -= lr * (mi / c1) / (std::sqrt(vi / c2) + options_.eps);
        data[i] = static_cast<T>(x);
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_)
      if (p.tensor.has_grad()) p.tensor.zero_grad();
  }

  const OptimState<T>& state() const { return state_; }
  const AdamWOptions& options() const { return options_; }

 private:
  std::vector<NamedTensor<T>> params_;
  AdamWOptions options_;
  OptimState<T> state_;
};

}  // namespace lpca
