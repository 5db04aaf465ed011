#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "lpca/core/ops.hpp"

namespace lpca {

inline constexpr double kBceClamp = 1e-7;

/// Per-pixel binary cross-entropy averaged over every element. Predictions
/// are clamped to [1e-7, 1-1e-7] before the logs; the gradient is the
/// derivative evaluated at the clamped value, so a saturated prediction
/// still receives a finite, correctly signed gradient.
template <class T>
Tensor<T> bce_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("bce_loss: pred " + to_string(pred.shape()) + " vs target " + to_string(target.shape()));
  }
  const auto p = pred.data();
  const auto t = target.data();
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double ti = static_cast<double>(t[i]);
    if (!(std::abs(ti) <= 1e-6 || std::abs(ti - 1.0) <= 1e-6)) {
      throw DataError("bce_loss: target " + std::to_string(ti) + " at element " + std::to_string(i) + " is not binary");
    }
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = std::clamp(static_cast<double>(p[i]), kBceClamp, 1.0 - kBceClamp);
    const double ti = static_cast<double>(t[i]);
    acc -= ti * std::log(q) + (1.0 - ti) * std::log(1.0 - q);
  }
  Tensor<T> out(Shape{}, static_cast<T>(acc / static_cast<double>(n)));
  if (detail::recording<T>({&pred})) {
    auto pp = pred.impl(), pt = target.impl(), po = out.impl();
    detail::record<T>("bce_loss", {pp}, out, [pp, pt, po, n] {
      auto& g = pp->grad_buffer();
      const double scale = static_cast<double>(po->grad[0]) / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double q = std::clamp(static_cast<double>(pp->data[i]), kBceClamp, 1.0 - kBceClamp);
        const double ti = static_cast<double>(pt->data[i]);
        g[i] += static_cast<T>(scale * (q - ti) / (q * (1.0 - q)));
      }
    });
  }
  return out;
}

}  // namespace lpca
