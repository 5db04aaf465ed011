#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lpca/core/tensor.hpp"
#include "lpca/data/netpbm.hpp"

namespace lpca {

/// One RGB-D frame with its defect mask, as stored on disk.
struct Sample {
  std::string id;
  Image rgb;    // 3 channels
  Image depth;  // 1 channel
  Image mask;   // 1 channel, values in {0, 255}

  std::size_t height() const { return rgb.height; }
  std::size_t width() const { return rgb.width; }
};

inline void validate(const Sample& s) {
  auto fail = [&](const std::string& what) { throw DataError("sample '" + s.id + "': " + what); };
  if (s.rgb.channels != 3) fail("RGB image must have 3 channels");
  if (s.depth.channels != 1 || s.mask.channels != 1) fail("depth and mask must be single-channel");
  if (s.depth.width != s.rgb.width || s.depth.height != s.rgb.height || s.mask.width != s.rgb.width ||
      s.mask.height != s.rgb.height) {
    fail("size mismatch: rgb " + std::to_string(s.rgb.width) + "x" + std::to_string(s.rgb.height) + ", depth " +
         std::to_string(s.depth.width) + "x" + std::to_string(s.depth.height) + ", mask " +
         std::to_string(s.mask.width) + "x" + std::to_string(s.mask.height));
  }
  for (auto v : s.mask.bytes)
    if (v != 0 && v != 255) fail("mask is not bilevel");
}

/// Maps every mask pixel to {0, 255} at 128 and returns how many pixels
/// were neither value before.
inline std::size_t binarize_mask(Image& mask) {
  std::size_t changed = 0;
  for (auto& v : mask.bytes) {
    if (v != 0 && v != 255) ++changed;
    v = v >= 128 ? 255 : 0;
  }
  return changed;
}

struct ManifestRecord {
  std::string id;
  std::filesystem::path rgb, depth, mask;
  std::string split = "train";
};

/// Tab-separated `id rgb depth mask [split]` lines; blank lines and lines
/// starting with '#' are skipped. Relative paths resolve against the
/// manifest's directory.
inline std::vector<ManifestRecord> load_manifest(const std::filesystem::path& path,
                                                 const std::optional<std::string>& split = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open manifest");
  const std::filesystem::path base = path.parent_path();
  std::vector<ManifestRecord> out;
  std::set<std::string> ids;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string field; std::getline(ss, field, '\t');) f.push_back(field);
    if (f.size() != 4 && f.size() != 5) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 4 or 5 tab-separated fields, got " +
                      std::to_string(f.size()));
    }
    ManifestRecord r{f[0], base / f[1], base / f[2], base / f[3], f.size() == 5 ? f[4] : "train"};
    if (r.split != "train" && r.split != "test") {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": split must be train or test");
    }
    if (!ids.insert(r.id).second) throw DataError(path.string() + ": duplicate id '" + r.id + "'");
    if (!split || *split == r.split) out.push_back(std::move(r));
  }
  return out;
}

struct Dataset {
  std::vector<Sample> samples;
  std::size_t binarized_pixels = 0;  // mask pixels that needed the 128 threshold
};

inline Sample load_sample(const ManifestRecord& r, std::size_t* binarized = nullptr) {
  Sample s;
  s.id = r.id;
  try {
    s.rgb = read_ppm(r.rgb);
    s.depth = read_pgm(r.depth);
    s.mask = read_pgm(r.mask);
  } catch (const DataError& e) {
    throw DataError("record '" + r.id + "': " + e.what());
  }
  const std::size_t changed = binarize_mask(s.mask);
  if (binarized != nullptr) *binarized += changed;
  validate(s);
  return s;
}

inline Dataset load_dataset(const std::filesystem::path& manifest,
                            const std::optional<std::string>& split = std::nullopt) {
  Dataset d;
  for (const auto& r : load_manifest(manifest, split)) d.samples.push_back(load_sample(r, &d.binarized_pixels));
  return d;
}

/// Sample scaled to [0,1] floats in CHW order; mask in {0,1}.
struct FloatSample {
  std::string id;
  std::size_t height = 0, width = 0;
  std::vector<float> rgb;    // 3·H·W
  std::vector<float> depth;  // H·W
  std::vector<float> mask;   // H·W

  bool operator==(const FloatSample&) const = default;
};

inline FloatSample to_float(const Sample& s) {
  validate(s);
  FloatSample f;
  f.id = s.id;
  f.height = s.height();
  f.width = s.width();
  const std::size_t hw = f.height * f.width;
  f.rgb.resize(3 * hw);
  f.depth.resize(hw);
  f.mask.resize(hw);
  for (std::size_t i = 0; i < hw; ++i) {
    for (std::size_t c = 0; c < 3; ++c) f.rgb[c * hw + i] = static_cast<float>(s.rgb.bytes[i * 3 + c]) / 255.0F;
    f.depth[i] = static_cast<float>(s.depth.bytes[i]) / 255.0F;
    f.mask[i] = s.mask.bytes[i] != 0 ? 1.0F : 0.0F;
  }
  return f;
}

template <class T>
struct Batch {
  Tensor<T> rgb;    // (N, 3, H, W)
  Tensor<T> depth;  // (N, 1, H, W)
  Tensor<T> mask;   // (N, 1, H, W)
};

template <class T>
Batch<T> make_batch(const std::vector<FloatSample>& samples, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw DataError("make_batch: empty batch");
  const std::size_t h = samples[indices[0]].height, w = samples[indices[0]].width, hw = h * w;
  const std::size_t n = indices.size();
  std::vector<T> rgb(n * 3 * hw), depth(n * hw), mask(n * hw);
  for (std::size_t b = 0; b < n; ++b) {
    const FloatSample& s = samples[indices[b]];
    if (s.height != h || s.width != w) throw DataError("make_batch: sample '" + s.id + "' differs in size");
    std::copy(s.rgb.begin(), s.rgb.end(), rgb.begin() + static_cast<std::ptrdiff_t>(b * 3 * hw));
    std::copy(s.depth.begin(), s.depth.end(), depth.begin() + static_cast<std::ptrdiff_t>(b * hw));
    std::copy(s.mask.begin(), s.mask.end(), mask.begin() + static_cast<std::ptrdiff_t>(b * hw));
  }
  return {Tensor<T>(Shape{n, 3, h, w}, std::move(rgb)), Tensor<T>(Shape{n, 1, h, w}, std::move(depth)),
          Tensor<T>(Shape{n, 1, h, w}, std::move(mask))};
}

}  // namespace lpca
