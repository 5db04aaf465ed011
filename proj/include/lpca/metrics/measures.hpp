#pragma once

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstddef>

#include "lpca/metrics/counts.hpp"

namespace lpca {

/// Mean absolute error between the prediction and the binary mask.
inline double mae(const EvalPair& p) {
  validate(p);
  if (p.size() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += std::fabs(p.pred[i] - static_cast<double>(p.gt[i]));
  return sum / static_cast<double>(p.size());
}

/// |B ∩ G| / |B ∪ G| with B = pred >= t; an empty union scores 1.
inline double iou(const EvalPair& p, double t = 0.5) {
  validate(p);
  std::uint64_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool b = p.pred[i] >= t, g = p.gt[i] != 0;
    inter += b && g;
    uni += b || g;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double max_f_measure(const EvalPair& p) {
  validate(p);
  const ThresholdCounts c = count_thresholds(p);
  double best = 0.0;
  for (std::size_t k = 0; k < kThresholds; ++k) best = std::max(best, f_measure_at(c, k));
  return best;
}

inline double max_e_measure(const EvalPair& p) {
  validate(p);
  const ThresholdCounts c = count_thresholds(p);
  double best = 0.0;
  for (std::size_t k = 0; k < kThresholds; ++k) best = std::max(best, e_measure_at(c, k));
  return best;
}

namespace structure {

inline constexpr double kEps = DBL_EPSILON;

// 2x / (x² + 1 + σ + eps) over the pixels where `mask` is set, σ the sample
// standard deviation.
inline double object_score(const EvalPair& p, bool foreground) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if ((p.gt[i] != 0) != foreground) continue;
    sum += foreground ? p.pred[i] : 1.0 - p.pred[i];
    ++n;
  }
  if (n == 0) return 0.0;
  const double x = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if ((p.gt[i] != 0) != foreground) continue;
    const double v = foreground ? p.pred[i] : 1.0 - p.pred[i];
    ss += (v - x) * (v - x);
  }
  const double sigma = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  return 2.0 * x / (x * x + 1.0 + sigma + kEps);
}

inline double s_object(const EvalPair& p) {
  std::size_t fg = 0;
  for (auto g : p.gt) fg += g;
  const double u = static_cast<double>(fg) / static_cast<double>(p.size());
  return u * object_score(p, true) + (1.0 - u) * object_score(p, false);
}

// SSIM-style score of the block rows [r0, r1) × cols [c0, c1).
inline double block_ssim(const EvalPair& p, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
  const auto n = static_cast<double>((r1 - r0) * (c1 - c0));
  double sx = 0.0, sy = 0.0;
  for (std::size_t r = r0; r < r1; ++r)
    for (std::size_t c = c0; c < c1; ++c) {
      sx += p.pred[r * p.width + c];
      sy += p.gt[r * p.width + c];
    }
  const double x = sx / n, y = sy / n;
  double vx = 0.0, vy = 0.0, cxy = 0.0;
  for (std::size_t r = r0; r < r1; ++r)
    for (std::size_t c = c0; c < c1; ++c) {
      const double dx = p.pred[r * p.width + c] - x, dy = p.gt[r * p.width + c] - y;
      vx += dx * dx;
      vy += dy * dy;
      cxy += dx * dy;
    }
  vx /= n - 1.0 + kEps;
  vy /= n - 1.0 + kEps;
  cxy /= n - 1.0 + kEps;
  const double alpha = 4.0 * x * y * cxy;
  const double beta = (x * x + y * y) * (vx + vy);
  if (alpha != 0.0) return alpha / (beta + kEps);
  return beta == 0.0 ? 1.0 : 0.0;
}

/// Rounded gt centroid as a 1-based split: rows [0, Y) and columns [0, X)
/// form the top-left quadrant. An empty gt splits at the image center.
inline std::pair<std::size_t, std::size_t> centroid(const EvalPair& p) {
  double total = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t r = 0; r < p.height; ++r)
    for (std::size_t c = 0; c < p.width; ++c) {
      const double g = p.gt[r * p.width + c];
      total += g;
      sx += g * static_cast<double>(c + 1);
      sy += g * static_cast<double>(r + 1);
    }
  if (total == 0.0) {
    return {static_cast<std::size_t>(std::round(static_cast<double>(p.width) / 2.0)),
            static_cast<std::size_t>(std::round(static_cast<double>(p.height) / 2.0))};
  }
  return {static_cast<std::size_t>(std::round(sx / total)), static_cast<std::size_t>(std::round(sy / total))};
}

inline double s_region(const EvalPair& p) {
  const auto [X, Y] = centroid(p);
  const double area = static_cast<double>(p.size());
  const std::size_t H = p.height, W = p.width;
  struct Block {
    std::size_t r0, r1, c0, c1;
  };
  const Block blocks[4] = {{0, Y, 0, X}, {0, Y, X, W}, {Y, H, 0, X}, {Y, H, X, W}};
  double score = 0.0;
  for (const auto& b : blocks) {
    const std::size_t n = (b.r1 - b.r0) * (b.c1 - b.c0);
    if (n == 0) continue;  // zero weight
    score += static_cast<double>(n) / area * block_ssim(p, b.r0, b.r1, b.c0, b.c1);
  }
  return score;
}

}  // namespace structure

/// Structure measure S_α = α·S_object + (1 − α)·S_region. Degenerate gt
/// compares the mean prediction with the constant mask.
inline double s_measure(const EvalPair& p, double alpha = 0.5) {
  validate(p);
  if (p.size() == 0) return 0.0;
  std::size_t fg = 0;
  double pred_sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    fg += p.gt[i];
    pred_sum += p.pred[i];
  }
  const double mean_pred = pred_sum / static_cast<double>(p.size());
  if (fg == 0) return 1.0 - mean_pred;
  if (fg == p.size()) return mean_pred;
  const double q = alpha * structure::s_object(p) + (1.0 - alpha) * structure::s_region(p);
  return std::max(q, 0.0);
}

}  // namespace lpca
