#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lpca/core/ops.hpp"
#include "lpca/layers/batchnorm.hpp"
#include "lpca/layers/conv.hpp"
#include "lpca/model/config.hpp"

namespace lpca {

enum class Activation { kNone, kRelu, kRelu6 };

template <class T>
Tensor<T> activate(const Tensor<T>& x, Activation a) {
  switch (a) {
    case Activation::kRelu: return relu(x);
    case Activation::kRelu6: return relu6(x);
    case Activation::kNone: break;
  }
  return x;
}

/// Bias-free convolution, batch norm, activation.
template <class T>
class ConvBnAct : public Module<T> {
 public:
  ConvBnAct() = default;
  ConvBnAct(Conv2dOptions conv, Activation act, const BatchNormOptions& bn)
      : conv_(without_bias(conv)), bn_(conv.out_channels, bn), act_(act) {
    this->register_module("conv", conv_);
    this->register_module("bn", bn_);
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) { return activate(bn_.forward(conv_.forward(x), mode), act_); }

 private:
  static Conv2dOptions without_bias(Conv2dOptions o) {
    o.bias = false;
    return o;
  }

  Conv2d<T> conv_;
  BatchNorm2d<T> bn_;
  Activation act_ = Activation::kNone;
};

/// MobileNetV2 bottleneck: 1×1 expand → depthwise 3×3 → 1×1 linear project,
/// with an identity skip when stride is 1 and channels are unchanged.
template <class T>
class InvertedResidual : public Module<T> {
 public:
  InvertedResidual() = default;
  InvertedResidual(std::size_t in, std::size_t out, std::size_t stride, std::size_t expand,
                   const BatchNormOptions& bn)
      : residual_(stride == 1 && in == out), expanded_(expand != 1) {
    const std::size_t hidden = in * expand;
    if (expanded_) {
      expand_ = ConvBnAct<T>(Conv2dOptions{in, hidden, {1, 1}, 1, {}, 1, false}, Activation::kRelu6, bn);
      this->register_module("expand", expand_);
    }
    depthwise_ = ConvBnAct<T>(Conv2dOptions{hidden, hidden, {3, 3}, stride, {}, hidden, false}, Activation::kRelu6, bn);
    project_ = ConvBnAct<T>(Conv2dOptions{hidden, out, {1, 1}, 1, {}, 1, false}, Activation::kNone, bn);
    this->register_module("depthwise", depthwise_);
    this->register_module("project", project_);
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    Tensor<T> h = expanded_ ? expand_.forward(x, mode) : x;
    h = project_.forward(depthwise_.forward(h, mode), mode);
    return residual_ ? add(h, x) : h;
  }

 private:
  bool residual_ = false;
  bool expanded_ = false;
  ConvBnAct<T> expand_;
  ConvBnAct<T> depthwise_;
  ConvBnAct<T> project_;
};

/// Randomly initialized inverted-residual pyramid returning features at
/// strides 4, 8, 16, 32.
template <class T>
class Backbone : public Module<T> {
 public:
  Backbone() = default;
  explicit Backbone(const ModelConfig& c) {
    const BatchNormOptions bn{c.bn_eps, c.bn_momentum};
    stem_ = ConvBnAct<T>(Conv2dOptions{3, c.stem_channels, {3, 3}, 2, {}, 1, false}, Activation::kRelu6, bn);
    this->register_module("stem", stem_);
    std::size_t channels = c.stem_channels;
    auto build = [&](const std::vector<BlockSpec>& specs, std::vector<InvertedResidual<T>>& blocks,
                     const std::string& prefix) {
      for (const auto& spec : specs) {
        for (std::size_t r = 0; r < spec.repeats; ++r) {
          blocks.emplace_back(channels, spec.channels, r == 0 ? spec.stride : 1, spec.expand, bn);
          this->register_module(prefix + "." + std::to_string(blocks.size() - 1), blocks.back());
          channels = spec.channels;
        }
      }
    };
    build(c.stem_blocks, stem_blocks_, "stem_blocks");
    for (std::size_t i = 0; i < 4; ++i) build(c.backbone_stages[i], stages_[i], "stage" + std::to_string(i + 1));
  }

  std::array<Tensor<T>, 4> forward(const Tensor<T>& rgb, Mode mode) {
    Tensor<T> x = stem_.forward(rgb, mode);
    for (auto& b : stem_blocks_) x = b.forward(x, mode);
    std::array<Tensor<T>, 4> out;
    for (std::size_t i = 0; i < 4; ++i) {
      for (auto& b : stages_[i]) x = b.forward(x, mode);
      out[i] = x;
    }
    return out;
  }

 private:
  ConvBnAct<T> stem_;
  std::vector<InvertedResidual<T>> stem_blocks_;
  std::array<std::vector<InvertedResidual<T>>, 4> stages_;
};

}  // namespace lpca
