#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lpca/model/blocks.hpp"
#include "lpca/model/cam.hpp"
#include "lpca/model/config.hpp"
#include "lpca/model/lpm.hpp"
#include "lpca/model/sfe.hpp"

namespace lpca {

template <class T>
struct StageFeatures {
  Tensor<T> rgb;                   // F_r
  Tensor<T> depth;                 // F_d
  Tensor<T> fused;                 // F_ca, or the 1×1 concat fusion when CAM is off
  std::optional<Tensor<T>> sfe;    // f_out, absent where the stage mask is off
};

template <class T>
struct Trace {
  std::array<StageFeatures<T>, 4> stages;
  Tensor<T> down;    // F_down
  Tensor<T> logits;  // (N, 1, H, W) before the sigmoid
  Tensor<T> mask;    // sigmoid(logits)
};

/// Decoder from F_down to a one-channel logit map at input resolution.
template <class T>
class MaskHead : public Module<T> {
 public:
  MaskHead() = default;
  MaskHead(const ModelConfig& c, std::size_t channels) : mode_(c.upsample), r_(c.upscale()) {
    bn_ = BatchNorm2d<T>(channels, BatchNormOptions{c.bn_eps, c.bn_momentum});
    this->register_module("bn", bn_);
    switch (mode_) {
      case UpsampleMode::kPixelShuffle:
        convs_.emplace_back(Conv2dOptions{channels, r_ * r_, {1, 1}, 1, {}, 1, true});
        break;
      case UpsampleMode::kNearest:
      case UpsampleMode::kBilinear:
        convs_.emplace_back(Conv2dOptions{channels, 1, {1, 1}, 1, {}, 1, true});
        break;
      case UpsampleMode::kTransposedConv:
      case UpsampleMode::kPatchExpand:
        upsampler_ = Upsampler<T>(mode_, channels, 1, r_);
        this->register_module("upsample", upsampler_);
        break;
      case UpsampleMode::kStagedPixelShuffle: {
        const std::size_t w = c.staged_width;
        convs_.emplace_back(Conv2dOptions{channels, w * 16, {1, 1}, 1, {}, 1, true});
        convs_.emplace_back(Conv2dOptions{w, w * 16, {3, 3}, 1, {}, 1, true});
        convs_.emplace_back(Conv2dOptions{w, 16, {3, 3}, 1, {}, 1, true});
        break;
      }
    }
    for (std::size_t i = 0; i < convs_.size(); ++i) this->register_module("conv" + std::to_string(i), convs_[i]);
  }

  Tensor<T> forward(const Tensor<T>& down, Mode mode) {
    const Tensor<T> x = relu(bn_.forward(down, mode));
    switch (mode_) {
      case UpsampleMode::kPixelShuffle: return pixel_shuffle(convs_[0].forward(x), r_);
      case UpsampleMode::kNearest:
      case UpsampleMode::kBilinear: return upsample_fixed(convs_[0].forward(x), mode_, r_);
      case UpsampleMode::kTransposedConv:
      case UpsampleMode::kPatchExpand: return upsampler_.forward(x);
      case UpsampleMode::kStagedPixelShuffle: {
        Tensor<T> h = x;
        for (std::size_t i = 0; i < convs_.size(); ++i) {
          h = pixel_shuffle(convs_[i].forward(h), 4);
          if (i + 1 < convs_.size()) h = relu(h);
        }
        return h;
      }
    }
    throw ConfigError("unsupported upsample mode");
  }

 private:
  UpsampleMode mode_ = UpsampleMode::kPixelShuffle;
  std::size_t r_ = 64;
  BatchNorm2d<T> bn_;
  std::vector<Conv2d<T>> convs_;
  Upsampler<T> upsampler_;
};

/// Dual-stream RGB-D segmentation network: MobileNetV2-style RGB backbone,
/// lightweight depth pyramid, per-stage cross attention and spatial feature
/// extraction, progressive stride-2 fusion and a pixel-shuffle mask head.
template <class T>
class LPCANet : public Module<T> {
 public:
  /// Builds the network and fills every parameter from `seed`.
  LPCANet(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    const auto& c = config_;
    const BatchNormOptions bn{c.bn_eps, c.bn_momentum};
    const StageArray rgb_ch = c.rgb_channels();
    const StageArray& d_ch = c.depth_channels;
    const StageArray& ch = c.cam_channels;

    backbone_ = Backbone<T>(c);
    lpm_ = LightweightPyramid<T>(c);
    this->register_module("backbone", backbone_);
    this->register_module("lpm", lpm_);
    for (std::size_t i = 0; i < 4; ++i) {
      const std::string s = std::to_string(i + 1);
      if (c.use_cam) {
        cam_[i] = CrossAttention<T>(rgb_ch[i], d_ch[i], ch[i], c.num_heads);
        this->register_module("cam" + s, cam_[i]);
      } else {
        concat_[i] = Conv2d<T>(Conv2dOptions{rgb_ch[i] + d_ch[i], ch[i], {1, 1}, 1, {}, 1, true});
        this->register_module("concat" + s, concat_[i]);
      }
      if (c.sfe_stages[i]) {
        sfe_[i] = SpatialFeatureExtractor<T>(ch[i], bn);
        merge_[i] = Conv2d<T>(Conv2dOptions{2 * ch[i], ch[i], {1, 1}, 1, {}, 1, true});
        this->register_module("sfe" + s, sfe_[i]);
        this->register_module("merge" + s, merge_[i]);
      }
      if (i > 0) {
        down_[i] = Conv2d<T>(Conv2dOptions{ch[i - 1], ch[i - 1], {4, 4}, 2, {}, 1, true});
        match_[i] = Conv2d<T>(Conv2dOptions{ch[i - 1], ch[i], {1, 1}, 1, {}, 1, true});
        this->register_module("down" + s, down_[i]);
        this->register_module("match" + s, match_[i]);
      }
    }
    final_down_ = Conv2d<T>(Conv2dOptions{ch[3], ch[3], {4, 4}, 2, {}, 1, true});
    head_ = MaskHead<T>(c, ch[3]);
    this->register_module("final_down", final_down_);
    this->register_module("head", head_);
    init_parameters(*this, seed);
  }

  const ModelConfig& config() const { return config_; }

  Trace<T> trace(const Tensor<T>& rgb, const Tensor<T>& depth, Mode mode) {
    check_inputs(rgb, depth);
    Trace<T> t;
    const auto f_r = backbone_.forward(rgb, mode);
    const auto f_d = lpm_.forward(depth, mode);
    Tensor<T> carry;
    for (std::size_t i = 0; i < 4; ++i) {
      StageFeatures<T>& s = t.stages[i];
      s.rgb = f_r[i];
      s.depth = f_d[i];
      if (s.rgb.shape().h != s.depth.shape().h || s.rgb.shape().w != s.depth.shape().w) {
        throw ShapeError("stage " + std::to_string(i + 1) + ": RGB " + to_string(s.rgb.shape()) + " vs depth " +
                         to_string(s.depth.shape()));
      }
      s.fused = config_.use_cam ? cam_[i].forward(s.rgb, s.depth)
                                : concat_[i].forward(concat_channels(s.rgb, s.depth));
      Tensor<T> stage_out = s.fused;
      if (config_.sfe_stages[i]) {
        s.sfe = sfe_[i].forward(s.fused, mode);
        stage_out = merge_[i].forward(concat_channels(s.fused, *s.sfe));
      }
      carry = i == 0 ? stage_out : add(stage_out, match_[i].forward(down_[i].forward(carry)));
    }
    t.down = final_down_.forward(carry);
    t.logits = head_.forward(t.down, mode);
    t.mask = sigmoid(t.logits);
    return t;
  }

  /// Probability mask (N, 1, H, W).
  Tensor<T> forward(const Tensor<T>& rgb, const Tensor<T>& depth, Mode mode) {
    return trace(rgb, depth, mode).mask;
  }

  CrossAttention<T>& cam(std::size_t stage) { return cam_.at(stage); }

 private:
  void check_inputs(const Tensor<T>& rgb, const Tensor<T>& depth) const {
    const Shape& a = rgb.shape();
    const Shape& b = depth.shape();
    if (a.c != 3 || a.h != config_.input_h || a.w != config_.input_w) {
      throw ShapeError("LPCANet: RGB input " + to_string(a) + " does not match (N,3," +
                       std::to_string(config_.input_h) + "," + std::to_string(config_.input_w) + ")");
    }
    if (b.n != a.n || b.c != 1 || b.h != a.h || b.w != a.w) {
      throw ShapeError("LPCANet: depth input " + to_string(b) + " does not pair with RGB " + to_string(a));
    }
  }

  ModelConfig config_;
  Backbone<T> backbone_;
  LightweightPyramid<T> lpm_;
  std::array<CrossAttention<T>, 4> cam_;
  std::array<Conv2d<T>, 4> concat_;
  std::array<SpatialFeatureExtractor<T>, 4> sfe_;
  std::array<Conv2d<T>, 4> merge_;
  std::array<Conv2d<T>, 4> down_;
  std::array<Conv2d<T>, 4> match_;
  Conv2d<T> final_down_;
  MaskHead<T> head_;
};

}  // namespace lpca
