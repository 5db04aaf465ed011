#pragma once

#include <cstddef>
#include <vector>

#include "lpca/core/ops.hpp"
#include "lpca/layers/module.hpp"

namespace lpca {

struct BatchNormOptions {
  double eps = 1e-5;
  double momentum = 0.1;
};

/// Train mode normalizes with batch statistics and moves the running
/// statistics toward them: running ← (1 − m)·running + m·batch. The running
/// variance tracks the unbiased batch variance. Eval mode is a fixed affine map.
template <class T>
class BatchNorm2d : public Module<T> {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(std::size_t channels, BatchNormOptions o = {}) : channels_(channels), opts_(o) {
    const Shape s{1, channels, 1, 1};
    gamma_ = this->register_parameter("weight", Tensor<T>(s, T(1)), InitRule::ones());
    beta_ = this->register_parameter("bias", Tensor<T>(s), InitRule::zeros());
    running_mean_ = this->register_buffer("running_mean", Tensor<T>(s), InitRule::zeros());
    running_var_ = this->register_buffer("running_var", Tensor<T>(s, T(1)), InitRule::ones());
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    if (x.shape().c != channels_) {
      throw ShapeError("BatchNorm2d: expected " + std::to_string(channels_) + " channels, got " +
                       to_string(x.shape()));
    }
    if (mode == Mode::kEval) {
      return batch_norm_eval(x, gamma_, beta_, running_mean_, running_var_, static_cast<T>(opts_.eps));
    }
    std::vector<double> mean(channels_), var(channels_);
    Tensor<T> y = batch_norm_train(x, gamma_, beta_, static_cast<T>(opts_.eps), std::span<double>(mean),
                                   std::span<double>(var));
    const Shape& s = x.shape();
    const double count = static_cast<double>(s.n * s.h * s.w);
    auto rm = running_mean_.mutable_data();
    auto rv = running_var_.mutable_data();
    const double m = opts_.momentum;
    for (std::size_t c = 0; c < channels_; ++c) {
      rm[c] = static_cast<T>((1.0 - m) * rm[c] + m * mean[c]);
      rv[c] = static_cast<T>((1.0 - m) * rv[c] + m * var[c] * count / (count - 1.0));
    }
    return y;
  }

  std::size_t channels() const { return channels_; }
  std::size_t param_count() const { return 2 * channels_; }
  Tensor<T>& gamma() { return gamma_; }
  Tensor<T>& beta() { return beta_; }
  Tensor<T>& running_mean() { return running_mean_; }
  Tensor<T>& running_var() { return running_var_; }

 private:
  std::size_t channels_ = 0;
  BatchNormOptions opts_;
  Tensor<T> gamma_, beta_, running_mean_, running_var_;
};

}  // namespace lpca
