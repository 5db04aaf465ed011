#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "lpca/core/error.hpp"
#include "lpca/core/rng.hpp"
#include "lpca/data/sample.hpp"

namespace lpca {

struct AugmentSpec {
  double flip_prob = 0.5;
  double crop_scale_min = 0.7;  // side length of the crop window as a fraction of the image
  double crop_scale_max = 1.0;
  double rotation_degrees = 15.0;  // angle drawn uniformly from [-deg, deg]
  double gaussian_sigma = 0.01;
  double impulse_prob = 0.01;
  std::uint64_t seed = 0;

  static AugmentSpec identity() { return {0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0}; }
};

inline void validate(const AugmentSpec& s) {
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in01(s.flip_prob) || !in01(s.impulse_prob)) throw ConfigError("augment: probabilities must lie in [0,1]");
  if (!(s.crop_scale_min > 0.0 && s.crop_scale_min <= s.crop_scale_max && s.crop_scale_max <= 1.0)) {
    throw ConfigError("augment: crop scale range must satisfy 0 < min <= max <= 1");
  }
  if (!(s.rotation_degrees >= 0.0) || !(s.gaussian_sigma >= 0.0)) {
    throw ConfigError("augment: rotation range and noise sigma must be non-negative");
  }
}

/// The geometric part of one draw.
struct AugmentDraw {
  bool flip = false;
  std::size_t crop_x = 0, crop_y = 0, crop_w = 0, crop_h = 0;
  double angle = 0.0;  // radians
};

namespace augment_detail {

// Resamples every plane of `planes` (each H·W) through `src(x, y) -> (sx, sy)`
// with edge clamping. Masks use nearest lookup, images bilinear.
template <class Map>
std::vector<float> warp(const std::vector<float>& plane, std::size_t h, std::size_t w, bool nearest, Map src) {
  std::vector<float> out(h * w);
  auto at = [&](long x, long y) {
    x = std::clamp<long>(x, 0, static_cast<long>(w) - 1);
    y = std::clamp<long>(y, 0, static_cast<long>(h) - 1);
    return plane[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
  };
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const auto [sx, sy] = src(static_cast<double>(x), static_cast<double>(y));
      float v;
      if (nearest) {
        v = at(std::lround(sx), std::lround(sy));
      } else {
        const double fx = std::floor(sx), fy = std::floor(sy);
        const double ax = sx - fx, ay = sy - fy;
        const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
        v = static_cast<float>((1 - ay) * ((1 - ax) * at(x0, y0) + ax * at(x0 + 1, y0)) +
                               ay * ((1 - ax) * at(x0, y0 + 1) + ax * at(x0 + 1, y0 + 1)));
      }
      out[y * w + x] = v;
    }
  }
  return out;
}

template <class Map>
void warp_all(FloatSample& s, Map src) {
  const std::size_t h = s.height, w = s.width, hw = h * w;
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<float> plane(s.rgb.begin() + static_cast<std::ptrdiff_t>(c * hw),
                             s.rgb.begin() + static_cast<std::ptrdiff_t>((c + 1) * hw));
    plane = warp(plane, h, w, false, src);
    std::copy(plane.begin(), plane.end(), s.rgb.begin() + static_cast<std::ptrdiff_t>(c * hw));
  }
  s.depth = warp(s.depth, h, w, false, src);
  s.mask = warp(s.mask, h, w, true, src);
}

}  // namespace augment_detail

/// Draws flip, crop window and rotation angle. Degenerate crops (under two
/// pixels on a side) are redrawn up to 8 times, then the full frame is used.
inline AugmentDraw draw_geometry(const AugmentSpec& spec, std::size_t h, std::size_t w, Rng& rng) {
  AugmentDraw d;
  d.flip = spec.flip_prob > 0.0 && rng.bernoulli(spec.flip_prob);
  d.crop_w = w, d.crop_h = h;
  if (spec.crop_scale_min < 1.0) {
    for (int attempt = 0; attempt < 8; ++attempt) {
      const double s = rng.uniform(spec.crop_scale_min, spec.crop_scale_max);
      const auto cw = static_cast<std::size_t>(std::lround(s * static_cast<double>(w)));
      const auto ch = static_cast<std::size_t>(std::lround(s * static_cast<double>(h)));
      if (cw < 2 || ch < 2 || cw > w || ch > h) continue;
      d.crop_w = cw, d.crop_h = ch;
      d.crop_x = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(w - cw)));
      d.crop_y = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(h - ch)));
      break;
    }
  }
  if (spec.rotation_degrees > 0.0) {
    d.angle = rng.uniform(-spec.rotation_degrees, spec.rotation_degrees) * std::numbers::pi / 180.0;
  }
  return d;
}

inline void flip_horizontal(FloatSample& s) {
  const std::size_t h = s.height, w = s.width;
  auto flip = [&](std::vector<float>& v, std::size_t planes) {
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t y = 0; y < h; ++y) {
        auto row = v.begin() + static_cast<std::ptrdiff_t>((p * h + y) * w);
        std::reverse(row, row + static_cast<std::ptrdiff_t>(w));
      }
  };
  flip(s.rgb, 3);
  flip(s.depth, 1);
  flip(s.mask, 1);
}

/// Applies one geometric draw jointly to RGB, depth and mask. Crop-rescale
/// and rotation are composed into a single inverse map and resampled once.
inline void apply_geometry(FloatSample& s, const AugmentDraw& d) {
  if (d.flip) flip_horizontal(s);
  const bool cropped = d.crop_w != s.width || d.crop_h != s.height;
  if (!cropped && d.angle == 0.0) return;
  const double w = static_cast<double>(s.width), h = static_cast<double>(s.height);
  // Output pixel centres map onto the crop window's pixel centres.
  const double sx = static_cast<double>(d.crop_w) / w, sy = static_cast<double>(d.crop_h) / h;
  const double ox = static_cast<double>(d.crop_x), oy = static_cast<double>(d.crop_y);
  const double cx = (w - 1) / 2, cy = (h - 1) / 2, c = std::cos(d.angle), sn = std::sin(d.angle);
  augment_detail::warp_all(s, [=](double x, double y) {
    const double dx = x - cx, dy = y - cy;
    const double rx = cx + c * dx + sn * dy, ry = cy - sn * dx + c * dy;
    return std::pair{ox + (rx + 0.5) * sx - 0.5, oy + (ry + 0.5) * sy - 0.5};
  });
}

/// Additive Gaussian noise on RGB and depth, then salt-and-pepper on RGB
/// (all three channels of a hit pixel set to 0 or 1). The mask is untouched.
inline void apply_noise(FloatSample& s, const AugmentSpec& spec, Rng& rng) {
  if (spec.gaussian_sigma > 0.0) {
    auto noisy = [&](float v) {
      return static_cast<float>(std::clamp(static_cast<double>(v) + rng.normal(0.0, spec.gaussian_sigma), 0.0, 1.0));
    };
    for (auto& v : s.rgb) v = noisy(v);
    for (auto& v : s.depth) v = noisy(v);
  }
  if (spec.impulse_prob > 0.0) {
    const std::size_t hw = s.height * s.width;
    for (std::size_t i = 0; i < hw; ++i) {
      if (!rng.bernoulli(spec.impulse_prob)) continue;
      const float v = rng.bernoulli(0.5) ? 1.0F : 0.0F;
      for (std::size_t c = 0; c < 3; ++c) s.rgb[c * hw + i] = v;
    }
  }
}

inline FloatSample augment(FloatSample s, const AugmentSpec& spec, Rng& rng) {
  validate(spec);
  apply_geometry(s, draw_geometry(spec, s.height, s.width, rng));
  apply_noise(s, spec, rng);
  return s;
}

}  // namespace lpca
