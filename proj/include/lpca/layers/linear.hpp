#pragma once

#include <cstddef>

#include "lpca/core/ops.hpp"
#include "lpca/layers/module.hpp"

namespace lpca {

/// y = x·Wᵀ + b over the last axis of a (B, 1, L, Din) token view.
template <class T>
class Linear : public Module<T> {
 public:
  Linear() = default;
  Linear(std::size_t in_features, std::size_t out_features, bool bias = true)
      : in_(in_features), out_(out_features) {
    weight_ = this->register_parameter("weight", Tensor<T>(Shape{1, 1, out_features, in_features}),
                                       InitRule::kaiming(in_features));
    if (bias) bias_ = this->register_parameter("bias", Tensor<T>(Shape{1, 1, 1, out_features}), InitRule::zeros());
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    return linear(x, weight_, bias_.defined() ? &bias_ : nullptr);
  }

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }
  std::size_t param_count() const { return in_ * out_ + (bias_.defined() ? out_ : 0); }
  std::size_t macs(std::size_t tokens) const { return tokens * in_ * out_; }

 private:
  std::size_t in_ = 0, out_ = 0;
  Tensor<T> weight_;
  Tensor<T> bias_;
};

}  // namespace lpca
