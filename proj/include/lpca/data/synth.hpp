#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "lpca/core/rng.hpp"
#include "lpca/data/sample.hpp"

namespace lpca {

enum class DefectKind { kScar, kCrack, kHole, kWeld };

inline std::string to_string(DefectKind k) {
  switch (k) {
    case DefectKind::kScar: return "scar";
    case DefectKind::kCrack: return "crack";
    case DefectKind::kHole: return "hole";
    case DefectKind::kWeld: return "weld";
  }
  return "?";
}

struct SynthSpec {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t min_defects = 1;
  std::size_t max_defects = 3;
  double depth_amplitude = 0.25;  // depression/bump depth in [0,1] depth units
  double texture_amplitude = 0.04;
  std::uint64_t seed = 0;
};

struct RenderedDefect {
  DefectKind kind;
  std::vector<std::uint8_t> support;  // H·W, 1 where the defect covers the pixel
};

struct SynthSample {
  Sample sample;
  std::vector<RenderedDefect> defects;
};

namespace synth {

struct Canvas {
  std::size_t h, w;
  std::vector<double> r, g, b, depth;
  std::vector<std::uint8_t> mask;
};

inline void background(Canvas& c, const SynthSpec& spec, Rng& rng) {
  const double W = static_cast<double>(c.w), H = static_cast<double>(c.h);
  const double center = W * rng.uniform(0.4, 0.6);
  const double spread = W * rng.uniform(0.25, 0.35);
  const double base = rng.uniform(0.3, 0.4);
  const double tint_r = rng.uniform(-0.05, 0.05), tint_b = rng.uniform(-0.05, 0.05);
  const double tilt = rng.uniform(-0.1, 0.1);
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::array<Wave, 4> waves{};
  for (auto& wv : waves) {
    wv = {rng.uniform(0.5, 4.0) / W, rng.uniform(0.5, 4.0) / H, rng.uniform(0.0, 2 * std::numbers::pi),
          spec.texture_amplitude * rng.uniform(0.3, 1.0)};
  }
  for (std::size_t y = 0; y < c.h; ++y) {
    for (std::size_t x = 0; x < c.w; ++x) {
      const double dx = (static_cast<double>(x) - center) / spread;
      double texture = 0.0;
      for (const auto& wv : waves)
        texture += wv.amp * std::sin(2 * std::numbers::pi * (wv.fx * x + wv.fy * y) + wv.phase);
      const double sheen = base + 0.3 * std::exp(-dx * dx) + 0.05 * static_cast<double>(y) / H + texture +
                           rng.uniform(-0.01, 0.01);
      const std::size_t i = y * c.w + x;
      c.r[i] = sheen * (1.0 + tint_r);
      c.g[i] = sheen;
      c.b[i] = sheen * (1.0 + tint_b);
      c.depth[i] = 0.6 + tilt * (static_cast<double>(x) / W - 0.5) + 0.5 * texture;
    }
  }
}

// Pixels inside a rotated ellipse; false when any part leaves the image.
inline bool ellipse(const Canvas& c, double cx, double cy, double a, double b, double angle,
                    std::vector<std::uint8_t>& out) {
  const double extent = std::max(a, b);
  if (cx - extent < 0 || cy - extent < 0 || cx + extent > static_cast<double>(c.w - 1) ||
      cy + extent > static_cast<double>(c.h - 1)) {
    return false;
  }
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (std::size_t y = 0; y < c.h; ++y)
    for (std::size_t x = 0; x < c.w; ++x) {
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      const double u = (dx * ca + dy * sa) / a, v = (-dx * sa + dy * ca) / b;
      out[y * c.w + x] = u * u + v * v <= 1.0;
    }
  return true;
}

// Random-walk polyline thickened to `width` pixels.
inline bool crack(const Canvas& c, Rng& rng, std::vector<std::uint8_t>& out) {
  const double W = static_cast<double>(c.w), H = static_cast<double>(c.h);
  double x = rng.uniform(0.15, 0.85) * W, y = rng.uniform(0.15, 0.85) * H;
  double theta = rng.uniform(0.0, 2 * std::numbers::pi);
  const auto steps = rng.uniform_int(10, 24);
  const double radius = static_cast<double>(rng.uniform_int(1, 3)) / 2.0;
  std::vector<std::pair<double, double>> pts{{x, y}};
  for (std::int64_t s = 0; s < steps; ++s) {
    theta += rng.normal(0.0, 0.35);
    const double len = rng.uniform(1.5, 3.0);
    x += len * std::cos(theta);
    y += len * std::sin(theta);
    if (x - radius < 0 || y - radius < 0 || x + radius > W - 1 || y + radius > H - 1) return false;
    pts.emplace_back(x, y);
  }
  std::fill(out.begin(), out.end(), 0);
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const auto [x0, y0] = pts[k];
    const auto [x1, y1] = pts[k + 1];
    const int n = static_cast<int>(std::ceil(std::hypot(x1 - x0, y1 - y0) * 2.0)) + 1;
    for (int t = 0; t <= n; ++t) {
      const double px = x0 + (x1 - x0) * t / n, py = y0 + (y1 - y0) * t / n;
      for (auto yy = static_cast<std::int64_t>(std::floor(py - radius)); yy <= static_cast<std::int64_t>(std::ceil(py + radius)); ++yy)
        for (auto xx = static_cast<std::int64_t>(std::floor(px - radius)); xx <= static_cast<std::int64_t>(std::ceil(px + radius)); ++xx) {
          const double ddx = static_cast<double>(xx) + 0.5 - (px + 0.5), ddy = static_cast<double>(yy) + 0.5 - (py + 0.5);
          if (ddx * ddx + ddy * ddy <= radius * radius + 0.25) out[static_cast<std::size_t>(yy) * c.w + static_cast<std::size_t>(xx)] = 1;
        }
    }
  }
  return true;
}

inline RenderedDefect render(Canvas& c, DefectKind kind, const SynthSpec& spec, Rng& rng) {
  const double W = static_cast<double>(c.w), H = static_cast<double>(c.h), S = std::min(W, H);
  RenderedDefect d{kind, std::vector<std::uint8_t>(c.h * c.w, 0)};
  constexpr int kRetries = 32;
  bool placed = false;
  for (int attempt = 0; attempt < kRetries && !placed; ++attempt) {
    const double cx = rng.uniform(0.0, W - 1), cy = rng.uniform(0.0, H - 1);
    switch (kind) {
      case DefectKind::kScar:
        placed = ellipse(c, cx, cy, S * rng.uniform(0.06, 0.16), S * rng.uniform(0.03, 0.08),
                         rng.uniform(0.0, std::numbers::pi), d.support);
        break;
      case DefectKind::kCrack: placed = crack(c, rng, d.support); break;
      case DefectKind::kHole: {
        const double r = S * rng.uniform(0.04, 0.09);
        placed = ellipse(c, cx, cy, r, r, 0.0, d.support);
        break;
      }
      case DefectKind::kWeld: {
        const double r = S * rng.uniform(0.06, 0.12);
        placed = ellipse(c, cx, cy, r, r, 0.0, d.support);
        break;
      }
    }
  }
  if (!placed) std::fill(d.support.begin(), d.support.end(), 0);
  const double amp = spec.depth_amplitude;
  for (std::size_t i = 0; i < d.support.size(); ++i) {
    if (!d.support[i]) continue;
    c.mask[i] = 1;
    switch (kind) {
      case DefectKind::kScar:
        c.r[i] *= 0.55, c.g[i] *= 0.55, c.b[i] *= 0.55;
        c.depth[i] -= 0.5 * amp;
        break;
      case DefectKind::kCrack:
        c.r[i] *= 0.3, c.g[i] *= 0.3, c.b[i] *= 0.3;
        c.depth[i] -= 0.7 * amp;
        break;
      case DefectKind::kHole:
        c.r[i] *= 0.35, c.g[i] *= 0.35, c.b[i] *= 0.35;
        c.depth[i] -= amp;
        break;
      case DefectKind::kWeld:
        c.r[i] = c.r[i] * 1.3 + 0.15, c.g[i] = c.g[i] * 1.3 + 0.15, c.b[i] = c.b[i] * 1.3 + 0.12;
        c.depth[i] += 0.6 * amp;
        break;
    }
  }
  return d;
}

inline std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace synth

/// Sample `index` of the synthetic set; depends only on (spec, index).
inline SynthSample synth_sample(const SynthSpec& spec, std::size_t index) {
  if (spec.height < 8 || spec.width < 8) throw ConfigError("synth: image must be at least 8x8");
  if (spec.min_defects > spec.max_defects) throw ConfigError("synth: defect range is empty");
  Rng rng = Rng(spec.seed).fork(index);
  synth::Canvas c{spec.height, spec.width, {}, {}, {}, {}, {}};
  const std::size_t n = spec.height * spec.width;
  c.r.resize(n), c.g.resize(n), c.b.resize(n), c.depth.resize(n), c.mask.assign(n, 0);
  synth::background(c, spec, rng);

  SynthSample out;
  const auto count = rng.uniform_int(static_cast<std::int64_t>(spec.min_defects),
                                     static_cast<std::int64_t>(spec.max_defects));
  for (std::int64_t k = 0; k < count; ++k) {
    const auto kind = static_cast<DefectKind>(rng.uniform_int(0, 3));
    out.defects.push_back(synth::render(c, kind, spec, rng));
  }

  char id[32];
  std::snprintf(id, sizeof id, "synth_%05zu", index);
  Sample& s = out.sample;
  s.id = id;
  s.rgb = Image(spec.width, spec.height, 3);
  s.depth = Image(spec.width, spec.height, 1);
  s.mask = Image(spec.width, spec.height, 1);
  for (std::size_t i = 0; i < n; ++i) {
    s.rgb.bytes[i * 3 + 0] = synth::quantize(c.r[i]);
    s.rgb.bytes[i * 3 + 1] = synth::quantize(c.g[i]);
    s.rgb.bytes[i * 3 + 2] = synth::quantize(c.b[i]);
    s.depth.bytes[i] = synth::quantize(c.depth[i]);
    s.mask.bytes[i] = c.mask[i] ? 255 : 0;
  }
  return out;
}

inline std::vector<SynthSample> synth_generate(const SynthSpec& spec, std::size_t count) {
  std::vector<SynthSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(synth_sample(spec, i));
  return out;
}

}  // namespace lpca
