#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lpca/model/config.hpp"

namespace lpca {

struct CostEntry {
  std::string component;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
};

/// Closed-form parameter and multiply-accumulate totals for one
/// (1, ·, H, W) forward pass. Derived from layer shapes alone, without
/// building the network.
struct Complexity {
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
  std::vector<CostEntry> breakdown;
};

namespace cost {

struct Tally {
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
};

inline std::uint64_t out_size(std::uint64_t in, std::uint64_t k, std::uint64_t stride, std::uint64_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// Conv weights Cout·(Cin/g)·kh·kw (+Cout bias); MACs Cout·(Cin/g)·kh·kw·Hout·Wout.
inline void conv(Tally& t, std::uint64_t cin, std::uint64_t cout, std::uint64_t kh, std::uint64_t kw,
                 std::uint64_t groups, bool bias, std::uint64_t hout, std::uint64_t wout) {
  const std::uint64_t per_output = (cin / groups) * kh * kw;
  t.params += cout * per_output + (bias ? cout : 0);
  t.macs += cout * per_output * hout * wout;
}

inline void batch_norm(Tally& t, std::uint64_t c) { t.params += 2 * c; }

inline void linear(Tally& t, std::uint64_t din, std::uint64_t dout, std::uint64_t tokens) {
  t.params += din * dout + dout;
  t.macs += tokens * din * dout;
}

}  // namespace cost

inline Complexity count_params_flops(const ModelConfig& c) {
  c.validate();
  Complexity result;
  auto commit = [&](const std::string& name, const cost::Tally& t) {
    result.breakdown.push_back({name, t.params, t.macs});
    result.params += t.params;
    result.macs += t.macs;
  };
  const std::uint64_t H = c.input_h, W = c.input_w;
  const StageArray rgb = c.rgb_channels();
  const StageArray& dep = c.depth_channels;
  const StageArray& ch = c.cam_channels;

  {
    cost::Tally t;
    std::uint64_t h = cost::out_size(H, 3, 2, 1), w = cost::out_size(W, 3, 2, 1);
    cost::conv(t, 3, c.stem_channels, 3, 3, 1, false, h, w);
    cost::batch_norm(t, c.stem_channels);
    std::uint64_t in = c.stem_channels;
    auto blocks = [&](const std::vector<BlockSpec>& specs) {
      for (const auto& b : specs) {
        for (std::size_t r = 0; r < b.repeats; ++r) {
          const std::uint64_t stride = r == 0 ? b.stride : 1;
          const std::uint64_t hidden = in * b.expand;
          if (b.expand != 1) {
            cost::conv(t, in, hidden, 1, 1, 1, false, h, w);
            cost::batch_norm(t, hidden);
          }
          h = cost::out_size(h, 3, stride, 1);
          w = cost::out_size(w, 3, stride, 1);
          cost::conv(t, hidden, hidden, 3, 3, hidden, false, h, w);
          cost::batch_norm(t, hidden);
          cost::conv(t, hidden, b.channels, 1, 1, 1, false, h, w);
          cost::batch_norm(t, b.channels);
          in = b.channels;
        }
      }
    };
    blocks(c.stem_blocks);
    for (const auto& stage : c.backbone_stages) blocks(stage);
    commit("backbone", t);
  }

  {
    cost::Tally t;
    cost::conv(t, 1, dep[0], 4, 4, 1, true, H / 4, W / 4);
    for (std::size_t i = 0; i < 4; ++i) {
      const std::uint64_t h = c.stage_h(i), w = c.stage_w(i);
      cost::conv(t, i == 0 ? dep[0] : dep[i - 1], dep[i], 3, 3, 1, false, h, w);
      cost::batch_norm(t, dep[i]);
      cost::conv(t, dep[i], dep[i], 3, 3, 1, false, h, w);
      cost::batch_norm(t, dep[i]);
    }
    commit("lpm", t);
  }

  for (std::size_t i = 0; i < 4; ++i) {
    const std::uint64_t h = c.stage_h(i), w = c.stage_w(i), L = h * w;
    const std::string s = std::to_string(i + 1);
    cost::Tally t;
    if (c.use_cam) {
      cost::linear(t, rgb[i], ch[i], L);
      cost::linear(t, dep[i], ch[i], L);
      cost::linear(t, dep[i], ch[i], L);
      t.macs += 2 * L * L * ch[i];  // QKᵀ and AV summed over heads
      cost::linear(t, ch[i], ch[i], L);
      commit("cam" + s, t);
    } else {
      cost::conv(t, rgb[i] + dep[i], ch[i], 1, 1, 1, true, h, w);
      commit("concat" + s, t);
    }
    if (c.sfe_stages[i]) {
      cost::Tally f;
      cost::conv(f, ch[i], ch[i], 1, 1, 1, false, h, w);
      for (int k = 0; k < 3; ++k) cost::batch_norm(f, ch[i]);
      cost::conv(f, ch[i], ch[i], 1, 3, 1, true, h, w);
      cost::conv(f, ch[i], ch[i], 3, 1, 1, true, h, w);
      cost::batch_norm(f, ch[i]);
      cost::conv(f, ch[i], ch[i], 1, 1, 1, true, h, w);
      cost::conv(f, 2 * ch[i], ch[i], 1, 1, 1, true, h, w);
      commit("sfe" + s, f);
    }
    if (i > 0) {
      cost::Tally d;
      cost::conv(d, ch[i - 1], ch[i - 1], 4, 4, 1, true, h, w);
      cost::conv(d, ch[i - 1], ch[i], 1, 1, 1, true, h, w);
      commit("down" + s, d);
    }
  }

  const std::uint64_t hd = c.stage_h(3) / 2, wd = c.stage_w(3) / 2, r = c.upscale();
  {
    cost::Tally t;
    cost::conv(t, ch[3], ch[3], 4, 4, 1, true, hd, wd);
    commit("final_down", t);
  }
  {
    cost::Tally t;
    cost::batch_norm(t, ch[3]);
    switch (c.upsample) {
      case UpsampleMode::kPixelShuffle: cost::conv(t, ch[3], r * r, 1, 1, 1, true, hd, wd); break;
      case UpsampleMode::kNearest:
      case UpsampleMode::kBilinear: cost::conv(t, ch[3], 1, 1, 1, 1, true, hd, wd); break;
      case UpsampleMode::kTransposedConv:
        t.params += ch[3] * r * r + 1;
        t.macs += ch[3] * r * r * hd * wd;
        break;
      case UpsampleMode::kPatchExpand: cost::conv(t, ch[3], r * r, 1, 1, 1, false, hd, wd); break;
      case UpsampleMode::kStagedPixelShuffle: {
        const std::uint64_t sw = c.staged_width;
        cost::conv(t, ch[3], 16 * sw, 1, 1, 1, true, hd, wd);
        cost::conv(t, sw, 16 * sw, 3, 3, 1, true, 4 * hd, 4 * wd);
        cost::conv(t, sw, 16, 3, 3, 1, true, 16 * hd, 16 * wd);
        break;
      }
    }
    commit("head", t);
  }
  return result;
}

}  // namespace lpca
