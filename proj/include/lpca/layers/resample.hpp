#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "lpca/core/ops.hpp"
#include "lpca/layers/conv.hpp"
#include "lpca/layers/module.hpp"

namespace lpca {

struct PoolOptions {
  PoolKind kind = PoolKind::kMax;
  Kernel kernel{2, 2};
  std::size_t stride = 2;
};

template <class T>
Tensor<T> pool_forward(const PoolOptions& o, const Tensor<T>& x) {
  return pool2d(x, o.kind, o.kernel.h, o.kernel.w, o.stride, o.stride);
}

enum class UpsampleMode {
  kPixelShuffle,
  kNearest,
  kBilinear,
  kTransposedConv,
  kPatchExpand,
  kStagedPixelShuffle,
};

inline std::string_view to_string(UpsampleMode m) {
  switch (m) {
    case UpsampleMode::kPixelShuffle: return "pixel_shuffle";
    case UpsampleMode::kNearest: return "nearest";
    case UpsampleMode::kBilinear: return "bilinear";
    case UpsampleMode::kTransposedConv: return "transposed_conv";
    case UpsampleMode::kPatchExpand: return "patch_expand";
    case UpsampleMode::kStagedPixelShuffle: return "staged_ps";
  }
  return "?";
}

inline UpsampleMode parse_upsample_mode(std::string_view s) {
  for (auto m : {UpsampleMode::kPixelShuffle, UpsampleMode::kNearest, UpsampleMode::kBilinear,
                 UpsampleMode::kTransposedConv, UpsampleMode::kPatchExpand, UpsampleMode::kStagedPixelShuffle}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unsupported upsample mode '" + std::string(s) + "'");
}

/// Parameter-free upsampling by integer factor r: nearest or bilinear.
template <class T>
Tensor<T> upsample_fixed(const Tensor<T>& x, UpsampleMode mode, std::size_t r) {
  if (r < 2) throw ShapeError("upsample: factor must be >= 2, got " + std::to_string(r));
  switch (mode) {
    case UpsampleMode::kNearest: return upsample_nearest(x, r);
    case UpsampleMode::kBilinear: return upsample_bilinear(x, r);
    default: throw ConfigError("upsample mode '" + std::string(to_string(mode)) + "' is learned, not fixed");
  }
}

/// Upsampling by r from `in_channels` to `out_channels`, covering every
/// alternative of the upsampling ablation:
///   pixel_shuffle    requires in == out·r², parameter-free
///   nearest/bilinear requires in == out, parameter-free
///   transposed_conv  learned r×r kernel with stride r
///   patch_expand     learned per-pixel expansion to r²·out channels, then
///                    rearranged into r×r patches
template <class T>
class Upsampler : public Module<T> {
 public:
  Upsampler() = default;
  Upsampler(UpsampleMode mode, std::size_t in_channels, std::size_t out_channels, std::size_t r)
      : mode_(mode), r_(r) {
    if (r < 2) throw ShapeError("upsample: factor must be >= 2, got " + std::to_string(r));
    switch (mode) {
      case UpsampleMode::kPixelShuffle:
        if (in_channels != out_channels * r * r) throw ShapeError("pixel_shuffle upsampler: in != out*r^2");
        break;
      case UpsampleMode::kNearest:
      case UpsampleMode::kBilinear:
        if (in_channels != out_channels) throw ShapeError("fixed upsampler: in != out channels");
        break;
      case UpsampleMode::kTransposedConv:
        deconv_ = ConvTranspose2d<T>(in_channels, out_channels, r);
        this->register_module("deconv", deconv_);
        break;
      case UpsampleMode::kPatchExpand:
        expand_ = Conv2d<T>(Conv2dOptions{in_channels, out_channels * r * r, {1, 1}, 1, {}, 1, false});
        this->register_module("expand", expand_);
        break;
      case UpsampleMode::kStagedPixelShuffle:
        throw ConfigError("staged_ps is a decoder layout, not a single upsampler");
    }
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    switch (mode_) {
      case UpsampleMode::kPixelShuffle: return pixel_shuffle(x, r_);
      case UpsampleMode::kNearest:
      case UpsampleMode::kBilinear: return upsample_fixed(x, mode_, r_);
      case UpsampleMode::kTransposedConv: return deconv_.forward(x);
      case UpsampleMode::kPatchExpand: return patch_rearrange(expand_.forward(x), r_);
      default: break;
    }
    throw ConfigError("unsupported upsample mode");
  }

  std::size_t param_count() const {
    if (mode_ == UpsampleMode::kTransposedConv) return deconv_.param_count();
    if (mode_ == UpsampleMode::kPatchExpand) return expand_.param_count();
    return 0;
  }
  std::size_t macs(const Shape& in) const {
    if (mode_ == UpsampleMode::kTransposedConv) return deconv_.macs(in);
    if (mode_ == UpsampleMode::kPatchExpand) return expand_.macs(in);
    return 0;
  }

 private:
  UpsampleMode mode_ = UpsampleMode::kPixelShuffle;
  std::size_t r_ = 2;
  ConvTranspose2d<T> deconv_;
  Conv2d<T> expand_;
};

}  // namespace lpca
