#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>

namespace lpca {

/// Cosine annealing from lr_base at step 0 to lr_min at total_steps; steps
/// past the end stay at lr_min.
inline double cosine_lr(std::size_t step, std::size_t total_steps, double lr_base, double lr_min) {
  if (step >= total_steps) return lr_min;
  if (step == 0) return lr_base;
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_min + 0.5 * (lr_base - lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace lpca
