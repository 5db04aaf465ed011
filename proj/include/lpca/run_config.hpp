#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "lpca/data/netpbm.hpp"
#include "lpca/data/synth.hpp"
#include "lpca/model/config.hpp"
#include "lpca/train/trainer.hpp"

namespace lpca {

/// Flat `key=value` text: one pair per line, '#' comments and blank lines
/// ignored, surrounding whitespace trimmed. Later lines win.
inline KeyValues parse_key_values(std::istream& in, const std::string& source = "<config>") {
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  KeyValues kv;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty()) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key=value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  return parse_key_values(in, path.string());
}

inline std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

inline void write_key_values(const KeyValues& kv, const std::filesystem::path& path) {
  const std::string s = format_key_values(kv);
  detail::write_file_atomic(path, std::vector<std::uint8_t>(s.begin(), s.end()));
}

/// Rejects keys outside the known sections so typos do not pass silently.
inline void check_sections(const KeyValues& kv) {
  static const char* kSections[] = {"model.", "train.", "augment.", "synth.", "data.", "run."};
  for (const auto& [k, v] : kv) {
    bool known = false;
    for (const char* s : kSections) known = known || k.rfind(s, 0) == 0;
    if (!known) throw ConfigError("unknown config key '" + k + "'");
  }
}

namespace detail {
inline std::pair<std::size_t, std::size_t> parse_hw(const std::string& key, const std::string& v) {
  const auto p = v.find('x');
  if (p == std::string::npos) throw ConfigError(key + ": expected HxW, got '" + v + "'");
  return {parse_size(key, v.substr(0, p)), parse_size(key, v.substr(p + 1))};
}

inline std::pair<std::size_t, std::size_t> parse_range(const std::string& key, const std::string& v) {
  const auto p = v.find('-');
  if (p == std::string::npos) {
    const auto n = parse_size(key, v);
    return {n, n};
  }
  return {parse_size(key, v.substr(0, p)), parse_size(key, v.substr(p + 1))};
}
}  // namespace detail

inline void write_config(const TrainPlan& p, KeyValues& kv) {
  using detail::format_real;
  kv["train.epochs"] = std::to_string(p.epochs);
  kv["train.batch_size"] = std::to_string(p.batch_size);
  kv["train.lr_base"] = format_real(p.lr_base);
  kv["train.lr_min"] = format_real(p.lr_min);
  kv["train.weight_decay"] = format_real(p.weight_decay);
  kv["train.max_steps"] = std::to_string(p.max_steps);
  kv["train.checkpoint_every"] = std::to_string(p.checkpoint_every);
  kv["train.eval_every"] = std::to_string(p.eval_every);
  kv["train.seed"] = std::to_string(p.seed);
  kv["train.augment"] = p.augment ? "true" : "false";
  const AugmentSpec& a = p.augment_spec;
  kv["augment.flip_prob"] = format_real(a.flip_prob);
  kv["augment.crop_scale"] = format_real(a.crop_scale_min) + "," + format_real(a.crop_scale_max);
  kv["augment.rotation_degrees"] = format_real(a.rotation_degrees);
  kv["augment.gaussian_sigma"] = format_real(a.gaussian_sigma);
  kv["augment.impulse_prob"] = format_real(a.impulse_prob);
}

inline TrainPlan read_plan(const KeyValues& kv, TrainPlan p) {
  using namespace detail;
  for (const auto& [k, v] : kv) {
    if (k == "train.epochs") p.epochs = parse_size(k, v);
    else if (k == "train.batch_size") p.batch_size = parse_size(k, v);
    else if (k == "train.lr_base") p.lr_base = parse_real(k, v);
    else if (k == "train.lr_min") p.lr_min = parse_real(k, v);
    else if (k == "train.weight_decay") p.weight_decay = parse_real(k, v);
    else if (k == "train.max_steps") p.max_steps = parse_size(k, v);
    else if (k == "train.checkpoint_every") p.checkpoint_every = parse_size(k, v);
    else if (k == "train.eval_every") p.eval_every = parse_size(k, v);
    else if (k == "train.seed") p.seed = parse_size(k, v);
    else if (k == "train.augment") p.augment = parse_bool(k, v);
    else if (k == "augment.flip_prob") p.augment_spec.flip_prob = parse_real(k, v);
    else if (k == "augment.crop_scale") {
      const auto f = split(v, ',');
      if (f.size() != 2) throw ConfigError(k + ": expected min,max");
      p.augment_spec.crop_scale_min = parse_real(k, f[0]);
      p.augment_spec.crop_scale_max = parse_real(k, f[1]);
    } else if (k == "augment.rotation_degrees") p.augment_spec.rotation_degrees = parse_real(k, v);
    else if (k == "augment.gaussian_sigma") p.augment_spec.gaussian_sigma = parse_real(k, v);
    else if (k == "augment.impulse_prob") p.augment_spec.impulse_prob = parse_real(k, v);
    else if (k.rfind("train.", 0) == 0 || k.rfind("augment.", 0) == 0) throw ConfigError("unknown config key '" + k + "'");
  }
  validate(p);
  return p;
}

inline void write_config(const SynthSpec& s, KeyValues& kv) {
  kv["synth.size"] = std::to_string(s.height) + "x" + std::to_string(s.width);
  kv["synth.defects"] = std::to_string(s.min_defects) + "-" + std::to_string(s.max_defects);
  kv["synth.depth_amplitude"] = detail::format_real(s.depth_amplitude);
  kv["synth.texture_amplitude"] = detail::format_real(s.texture_amplitude);
  kv["synth.seed"] = std::to_string(s.seed);
}

inline SynthSpec read_synth(const KeyValues& kv, SynthSpec s) {
  using namespace detail;
  for (const auto& [k, v] : kv) {
    if (k == "synth.size") std::tie(s.height, s.width) = parse_hw(k, v);
    else if (k == "synth.defects") std::tie(s.min_defects, s.max_defects) = parse_range(k, v);
    else if (k == "synth.depth_amplitude") s.depth_amplitude = parse_real(k, v);
    else if (k == "synth.texture_amplitude") s.texture_amplitude = parse_real(k, v);
    else if (k == "synth.seed") s.seed = parse_size(k, v);
    else if (k == "synth.n" || k == "synth.test") continue;
    else if (k.rfind("synth.", 0) == 0) throw ConfigError("unknown config key '" + k + "'");
  }
  return s;
}

/// Pixel scaling applied at load time; recorded so a run's inputs are fully described.
inline constexpr const char* kNormalization = "divide_by_255";

}  // namespace lpca
