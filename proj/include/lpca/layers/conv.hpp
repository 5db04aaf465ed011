#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "lpca/core/ops.hpp"
#include "lpca/layers/module.hpp"

namespace lpca {

struct Kernel {
  std::size_t h = 1;
  std::size_t w = 1;
};

struct Padding {
  std::size_t h = 0;
  std::size_t w = 0;
};

/// Zero padding that keeps the stage resolutions exact: 3×3 → (1,1), 1×3 → (0,1),
/// 3×1 → (1,0), 4×4/s2 → (1,1), 4×4/s4 → (0,0), 1×1 → (0,0).
inline Padding default_padding(Kernel k, std::size_t stride) {
  if (k.h == 4 && k.w == 4) return stride == 2 ? Padding{1, 1} : Padding{0, 0};
  return {k.h / 2, k.w / 2};
}

struct Conv2dOptions {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  Kernel kernel{};
  std::size_t stride = 1;
  std::optional<Padding> padding;  // default_padding() when unset
  std::size_t groups = 1;
  bool bias = true;
};

template <class T>
class Conv2d : public Module<T> {
 public:
  Conv2d() = default;

  explicit Conv2d(const Conv2dOptions& o)
      : opts_(o), pad_(o.padding.value_or(default_padding(o.kernel, o.stride))) {
    if (o.groups == 0 || o.in_channels % o.groups != 0 || o.out_channels % o.groups != 0) {
      throw ShapeError("Conv2d: channels " + std::to_string(o.in_channels) + "->" +
                       std::to_string(o.out_channels) + " not divisible by groups " +
                       std::to_string(o.groups));
    }
    const std::size_t cin_g = o.in_channels / o.groups;
    weight_ = this->register_parameter(
        "weight", Tensor<T>(Shape{o.out_channels, cin_g, o.kernel.h, o.kernel.w}),
        InitRule::kaiming(cin_g * o.kernel.h * o.kernel.w));
    if (o.bias) {
      bias_ = this->register_parameter("bias", Tensor<T>(Shape{1, o.out_channels, 1, 1}), InitRule::zeros());
    }
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    return conv2d(x, weight_, bias_.defined() ? &bias_ : nullptr, geometry());
  }

  Conv2dGeometry geometry() const { return {opts_.stride, opts_.stride, pad_.h, pad_.w, opts_.groups}; }
  const Conv2dOptions& options() const { return opts_; }
  const Tensor<T>& weight() const { return weight_; }
  Tensor<T>& weight() { return weight_; }
  const Tensor<T>* bias() const { return bias_.defined() ? &bias_ : nullptr; }

  Shape output_shape(const Shape& in) const {
    return {in.n, opts_.out_channels,
            detail::conv_out_size(in.h, opts_.kernel.h, opts_.stride, pad_.h, "Conv2d"),
            detail::conv_out_size(in.w, opts_.kernel.w, opts_.stride, pad_.w, "Conv2d")};
  }

  /// Cout·(Cin/groups·kH·kW) weights plus Cout biases.
  std::size_t param_count() const {
    return opts_.out_channels * (opts_.in_channels / opts_.groups) * opts_.kernel.h * opts_.kernel.w +
           (opts_.bias ? opts_.out_channels : 0);
  }

  /// Cout·(Cin/groups)·kH·kW·Hout·Wout for one image.
  std::size_t macs(const Shape& in) const {
    const Shape out = output_shape(in);
    return opts_.out_channels * (opts_.in_channels / opts_.groups) * opts_.kernel.h * opts_.kernel.w *
           out.h * out.w;
  }

 private:
  Conv2dOptions opts_;
  Padding pad_;
  Tensor<T> weight_;
  Tensor<T> bias_;
};

/// Learned upsampler: kernel == stride, no padding, so output is input·stride.
template <class T>
class ConvTranspose2d : public Module<T> {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(std::size_t in_channels, std::size_t out_channels, std::size_t factor)
      : in_(in_channels), out_(out_channels), factor_(factor) {
    weight_ = this->register_parameter("weight", Tensor<T>(Shape{in_channels, out_channels, factor, factor}),
                                       InitRule::kaiming(out_channels * factor * factor));
    bias_ = this->register_parameter("bias", Tensor<T>(Shape{1, out_channels, 1, 1}), InitRule::zeros());
  }

  Tensor<T> forward(const Tensor<T>& x) const { return conv_transpose2d(x, weight_, &bias_, factor_); }

  std::size_t param_count() const { return in_ * out_ * factor_ * factor_ + out_; }
  std::size_t macs(const Shape& in) const { return in_ * out_ * factor_ * factor_ * in.h * in.w; }

 private:
  std::size_t in_ = 0, out_ = 0, factor_ = 1;
  Tensor<T> weight_;
  Tensor<T> bias_;
};

}  // namespace lpca
