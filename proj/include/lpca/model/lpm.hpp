#pragma once

#include <array>
#include <cstddef>

#include "lpca/layers/resample.hpp"
#include "lpca/model/blocks.hpp"

namespace lpca {

/// Depth-stream pyramid. Stage 1 projects the single-channel depth map with a
/// 4×4 stride-4 convolution; every later stage halves the resolution by
/// pooling. Each stage then applies two 3×3 conv + BN + ReLU layers.
template <class T>
class LightweightPyramid : public Module<T> {
 public:
  LightweightPyramid() = default;
  explicit LightweightPyramid(const ModelConfig& c) : pool_{c.pool, {2, 2}, 2} {
    const BatchNormOptions bn{c.bn_eps, c.bn_momentum};
    const auto& ch = c.depth_channels;
    projection_ = Conv2d<T>(Conv2dOptions{1, ch[0], {4, 4}, 4, {}, 1, true});
    this->register_module("projection", projection_);
    for (std::size_t i = 0; i < 4; ++i) {
      const std::size_t in = i == 0 ? ch[0] : ch[i - 1];
      first_[i] = ConvBnAct<T>(Conv2dOptions{in, ch[i], {3, 3}, 1, {}, 1, false}, Activation::kRelu, bn);
      second_[i] = ConvBnAct<T>(Conv2dOptions{ch[i], ch[i], {3, 3}, 1, {}, 1, false}, Activation::kRelu, bn);
      const std::string prefix = "stage" + std::to_string(i + 1);
      this->register_module(prefix + ".0", first_[i]);
      this->register_module(prefix + ".1", second_[i]);
    }
  }

  std::array<Tensor<T>, 4> forward(const Tensor<T>& depth, Mode mode) {
    std::array<Tensor<T>, 4> out;
    Tensor<T> x = projection_.forward(depth);
    for (std::size_t i = 0; i < 4; ++i) {
      if (i > 0) x = pool_forward(pool_, x);
      x = second_[i].forward(first_[i].forward(x, mode), mode);
      out[i] = x;
    }
    return out;
  }

 private:
  PoolOptions pool_;
  Conv2d<T> projection_;
  std::array<ConvBnAct<T>, 4> first_;
  std::array<ConvBnAct<T>, 4> second_;
};

}  // namespace lpca
