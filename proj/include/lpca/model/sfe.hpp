#pragma once

#include <cstddef>
#include <string>

#include "lpca/layers/batchnorm.hpp"
#include "lpca/layers/conv.hpp"

namespace lpca {

/// Spatial feature extractor:
///   f_in  = ReLU(BN(Conv1×1(x)))
///   f_x   = Conv1×3(BN(f_in)),  f_y = Conv3×1(BN(f_in))
///   f_out = Conv1×1(BN(ReLU(f_x + f_y)))
/// The horizontal and vertical branches normalize independently.
template <class T>
class SpatialFeatureExtractor : public Module<T> {
 public:
  SpatialFeatureExtractor() = default;
  SpatialFeatureExtractor(std::size_t channels, const BatchNormOptions& bn) : channels_(channels) {
    conv_in_ = Conv2d<T>(Conv2dOptions{channels, channels, {1, 1}, 1, {}, 1, false});
    bn_in_ = BatchNorm2d<T>(channels, bn);
    bn_x_ = BatchNorm2d<T>(channels, bn);
    conv_x_ = Conv2d<T>(Conv2dOptions{channels, channels, {1, 3}, 1, {}, 1, true});
    bn_y_ = BatchNorm2d<T>(channels, bn);
    conv_y_ = Conv2d<T>(Conv2dOptions{channels, channels, {3, 1}, 1, {}, 1, true});
    bn_out_ = BatchNorm2d<T>(channels, bn);
    conv_out_ = Conv2d<T>(Conv2dOptions{channels, channels, {1, 1}, 1, {}, 1, true});
    this->register_module("conv_in", conv_in_);
    this->register_module("bn_in", bn_in_);
    this->register_module("bn_x", bn_x_);
    this->register_module("conv_x", conv_x_);
    this->register_module("bn_y", bn_y_);
    this->register_module("conv_y", conv_y_);
    this->register_module("bn_out", bn_out_);
    this->register_module("conv_out", conv_out_);
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    if (x.shape().c != channels_) {
      throw ShapeError("SFE: expected " + std::to_string(channels_) + " channels, got " + to_string(x.shape()));
    }
    const Tensor<T> f_in = relu(bn_in_.forward(conv_in_.forward(x), mode));
    const Tensor<T> fx = conv_x_.forward(bn_x_.forward(f_in, mode));
    const Tensor<T> fy = conv_y_.forward(bn_y_.forward(f_in, mode));
    return conv_out_.forward(bn_out_.forward(relu(add(fx, fy)), mode));
  }

 private:
  std::size_t channels_ = 0;
  Conv2d<T> conv_in_;
  BatchNorm2d<T> bn_in_, bn_x_;
  Conv2d<T> conv_x_;
  BatchNorm2d<T> bn_y_;
  Conv2d<T> conv_y_;
  BatchNorm2d<T> bn_out_;
  Conv2d<T> conv_out_;
};

}  // namespace lpca
