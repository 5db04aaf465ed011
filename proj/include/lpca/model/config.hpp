#pragma once

#include <array>
#include <charconv>
#include <cstddef>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lpca/core/error.hpp"
#include "lpca/core/ops.hpp"
#include "lpca/layers/resample.hpp"

namespace lpca {

/// One MobileNetV2 bottleneck row: expansion t, output channels c, repeats n,
/// stride s of the first repeat.
struct BlockSpec {
  std::size_t expand = 1;
  std::size_t channels = 0;
  std::size_t repeats = 1;
  std::size_t stride = 1;
  friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

using StageArray = std::array<std::size_t, 4>;

struct ModelConfig {
  std::string preset = "paper";
  std::size_t input_h = 320;
  std::size_t input_w = 320;

  // RGB stream: stem conv (stride 2) + stem blocks, then four stages ending at
  // strides 4, 8, 16, 32. The last block of stage i sets C_i^r.
  std::size_t stem_channels = 32;
  std::vector<BlockSpec> stem_blocks{{1, 16, 1, 1}};
  std::array<std::vector<BlockSpec>, 4> backbone_stages{{
      {{6, 24, 2, 2}},
      {{6, 32, 3, 2}},
      {{6, 64, 4, 2}, {6, 96, 3, 1}},
      {{6, 160, 3, 2}, {6, 320, 1, 1}},
  }};

  StageArray depth_channels{64, 128, 256, 512};  // C_i^d
  StageArray cam_channels{64, 128, 256, 512};    // C_i^c
  std::size_t num_heads = 4;                      // N_h; d_z = C_i^c / N_h

  bool use_cam = true;
  std::array<bool, 4> sfe_stages{true, true, true, false};
  UpsampleMode upsample = UpsampleMode::kPixelShuffle;
  PoolKind pool = PoolKind::kMax;
  std::size_t staged_width = 16;  // intermediate channels of the staged_ps decoder

  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  StageArray rgb_channels() const {
    StageArray out{};
    for (std::size_t i = 0; i < 4; ++i) out[i] = backbone_stages[i].back().channels;
    return out;
  }

  std::size_t head_dim(std::size_t stage) const { return cam_channels[stage] / num_heads; }

  /// Resolution of stage i ∈ {0..3}: H / 2^{i+2}.
  std::size_t stage_h(std::size_t stage) const { return input_h >> (stage + 2); }
  std::size_t stage_w(std::size_t stage) const { return input_w >> (stage + 2); }

  /// Total pixel-shuffle factor from the decoder input back to H×W.
  std::size_t upscale() const { return 64; }

  void validate() const {
    if (input_h == 0 || input_w == 0 || input_h % 64 != 0 || input_w % 64 != 0) {
      throw ConfigError("input size " + std::to_string(input_h) + "x" + std::to_string(input_w) +
                        " must be a positive multiple of 64");
    }
    if (num_heads == 0) throw ConfigError("num_heads must be positive");
    for (std::size_t i = 0; i < 4; ++i) {
      if (backbone_stages[i].empty()) throw ConfigError("backbone stage " + std::to_string(i + 1) + " is empty");
      std::size_t stride = 1;
      for (const auto& b : backbone_stages[i]) {
        if (b.channels == 0 || b.repeats == 0 || b.expand == 0 || b.stride == 0) {
          throw ConfigError("backbone block fields must be positive");
        }
        stride *= b.stride;
      }
      if (stride != 2) throw ConfigError("backbone stage " + std::to_string(i + 1) + " must downsample by 2");
      if (depth_channels[i] == 0 || cam_channels[i] == 0) throw ConfigError("stage channels must be positive");
      if (cam_channels[i] % num_heads != 0) {
        throw ConfigError("stage " + std::to_string(i + 1) + ": C^c = " + std::to_string(cam_channels[i]) +
                          " is not N_h * d_z for N_h = " + std::to_string(num_heads));
      }
    }
    for (const auto& b : stem_blocks) {
      if (b.stride != 1) throw ConfigError("stem blocks must keep stride 1");
    }
  }
};

inline ModelConfig paper_config() { return ModelConfig{}; }

inline ModelConfig tiny_config() {
  ModelConfig c;
  c.preset = "tiny";
  c.input_h = c.input_w = 64;
  c.stem_channels = 8;
  c.stem_blocks = {{1, 8, 1, 1}};
  c.backbone_stages = {{
      {{2, 8, 1, 2}},
      {{2, 16, 1, 2}},
      {{2, 32, 1, 2}},
      {{2, 64, 1, 2}},
  }};
  c.depth_channels = {8, 16, 32, 64};
  c.cam_channels = {8, 16, 32, 64};
  c.num_heads = 4;
  return c;
}

inline ModelConfig preset_config(const std::string& name) {
  if (name == "paper") return paper_config();
  if (name == "tiny") return tiny_config();
  throw ConfigError("unknown preset '" + name + "' (expected paper or tiny)");
}

/// Ablation switches; unset fields leave the base configuration untouched.
struct Ablation {
  bool no_cam = false;
  bool no_sfe = false;
  std::optional<std::array<bool, 4>> sfe_stages;
  std::optional<std::size_t> lpm_width;  // C_1^d; later stages double
  std::optional<UpsampleMode> upsample;
};

/// no_cam swaps attention for concat + 1×1 conv fusion; no_sfe clears the SFE
/// mask; lpm_width rescales the depth (and tied attention) pyramid.
inline ModelConfig ablation_variant(ModelConfig c, const Ablation& a) {
  if (a.sfe_stages) c.sfe_stages = *a.sfe_stages;
  if (a.no_sfe) c.sfe_stages = {false, false, false, false};
  if (a.no_cam) c.use_cam = false;
  if (a.lpm_width) {
    for (std::size_t i = 0; i < 4; ++i) {
      c.depth_channels[i] = *a.lpm_width << i;
      c.cam_channels[i] = c.depth_channels[i];
    }
  }
  if (a.upsample) c.upsample = *a.upsample;
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// key=value serialization

namespace detail {
inline std::string join_stages(const StageArray& a) {
  return std::to_string(a[0]) + "," + std::to_string(a[1]) + "," + std::to_string(a[2]) + "," +
         std::to_string(a[3]);
}

inline std::string join_blocks(const std::vector<BlockSpec>& blocks) {
  std::string s;
  for (const auto& b : blocks) {
    if (!s.empty()) s += ";";
    s += std::to_string(b.expand) + ":" + std::to_string(b.channels) + ":" + std::to_string(b.repeats) + ":" +
         std::to_string(b.stride);
  }
  return s;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

inline std::size_t parse_size(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const auto x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<std::size_t>(x);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
}

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

inline StageArray parse_stages(const std::string& key, const std::string& v) {
  const auto parts = split(v, ',');
  if (parts.size() != 4) throw ConfigError("config key '" + key + "': expected 4 comma-separated integers");
  StageArray a{};
  for (std::size_t i = 0; i < 4; ++i) a[i] = parse_size(key, parts[i]);
  return a;
}

inline std::vector<BlockSpec> parse_blocks(const std::string& key, const std::string& v) {
  std::vector<BlockSpec> out;
  for (const auto& item : split(v, ';')) {
    const auto f = split(item, ':');
    if (f.size() != 4) throw ConfigError("config key '" + key + "': blocks are t:c:n:s separated by ';'");
    out.push_back({parse_size(key, f[0]), parse_size(key, f[1]), parse_size(key, f[2]), parse_size(key, f[3])});
  }
  return out;
}

inline std::array<bool, 4> parse_mask(const std::string& key, const std::string& v) {
  if (v.size() != 4 || v.find_first_not_of("01") != std::string::npos) {
    throw ConfigError("config key '" + key + "': expected a 4-character 0/1 mask, got '" + v + "'");
  }
  return {v[0] == '1', v[1] == '1', v[2] == '1', v[3] == '1'};
}

// Shortest text that parses back to exactly `v`.
inline std::string format_real(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}
}  // namespace detail

using KeyValues = std::map<std::string, std::string>;

inline void write_config(const ModelConfig& c, KeyValues& kv) {
  kv["model.preset"] = c.preset;
  kv["model.input"] = std::to_string(c.input_h) + "x" + std::to_string(c.input_w);
  kv["model.stem_channels"] = std::to_string(c.stem_channels);
  kv["model.stem_blocks"] = detail::join_blocks(c.stem_blocks);
  for (std::size_t i = 0; i < 4; ++i) {
    kv["model.backbone_stage" + std::to_string(i + 1)] = detail::join_blocks(c.backbone_stages[i]);
  }
  kv["model.depth_channels"] = detail::join_stages(c.depth_channels);
  kv["model.cam_channels"] = detail::join_stages(c.cam_channels);
  kv["model.num_heads"] = std::to_string(c.num_heads);
  kv["model.cam"] = c.use_cam ? "enabled" : "disabled";
  std::string mask;
  for (bool b : c.sfe_stages) mask += b ? '1' : '0';
  kv["model.sfe_stages"] = mask;
  kv["model.upsample"] = std::string(to_string(c.upsample));
  kv["model.pool"] = c.pool == PoolKind::kMax ? "max" : "avg";
  kv["model.staged_width"] = std::to_string(c.staged_width);
  kv["model.bn_eps"] = detail::format_real(c.bn_eps);
  kv["model.bn_momentum"] = detail::format_real(c.bn_momentum);
}

/// Applies every model.* key present in `kv` on top of `c`. A model.preset key
/// resets to that preset first.
inline ModelConfig read_config(const KeyValues& kv, ModelConfig c) {
  if (auto it = kv.find("model.preset"); it != kv.end()) c = preset_config(it->second);
  for (const auto& [key, v] : kv) {
    if (key.rfind("model.", 0) != 0 || key == "model.preset") continue;
    if (key == "model.input") {
      const auto p = v.find('x');
      if (p == std::string::npos) throw ConfigError("model.input: expected HxW, got '" + v + "'");
      c.input_h = detail::parse_size(key, v.substr(0, p));
      c.input_w = detail::parse_size(key, v.substr(p + 1));
    } else if (key == "model.stem_channels") {
      c.stem_channels = detail::parse_size(key, v);
    } else if (key == "model.stem_blocks") {
      c.stem_blocks = detail::parse_blocks(key, v);
    } else if (key.rfind("model.backbone_stage", 0) == 0 && key.size() == 21 && key[20] >= '1' && key[20] <= '4') {
      c.backbone_stages[static_cast<std::size_t>(key[20] - '1')] = detail::parse_blocks(key, v);
    } else if (key == "model.depth_channels") {
      c.depth_channels = detail::parse_stages(key, v);
    } else if (key == "model.cam_channels") {
      c.cam_channels = detail::parse_stages(key, v);
    } else if (key == "model.num_heads") {
      c.num_heads = detail::parse_size(key, v);
    } else if (key == "model.cam") {
      if (v != "enabled" && v != "disabled") throw ConfigError("model.cam: expected enabled/disabled");
      c.use_cam = v == "enabled";
    } else if (key == "model.sfe_stages") {
      c.sfe_stages = detail::parse_mask(key, v);
    } else if (key == "model.upsample") {
      c.upsample = parse_upsample_mode(v);
    } else if (key == "model.pool") {
      if (v != "max" && v != "avg") throw ConfigError("model.pool: expected max/avg");
      c.pool = v == "max" ? PoolKind::kMax : PoolKind::kAvg;
    } else if (key == "model.staged_width") {
      c.staged_width = detail::parse_size(key, v);
    } else if (key == "model.bn_eps") {
      c.bn_eps = detail::parse_real(key, v);
    } else if (key == "model.bn_momentum") {
      c.bn_momentum = detail::parse_real(key, v);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

}  // namespace lpca
