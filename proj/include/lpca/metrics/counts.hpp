#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lpca/core/error.hpp"

namespace lpca {

/// One prediction map in [0,1] and its binary ground truth, row-major H×W.
struct EvalPair {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pred;
  std::vector<std::uint8_t> gt;  // 0 or 1

  std::size_t size() const { return height * width; }
};

inline void validate(const EvalPair& p) {
  if (p.pred.size() != p.size() || p.gt.size() != p.size()) {
    throw DataError("EvalPair: " + std::to_string(p.height) + "x" + std::to_string(p.width) + " map with " +
                    std::to_string(p.pred.size()) + " predictions and " + std::to_string(p.gt.size()) +
                    " ground-truth pixels");
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p.pred[i] >= 0.0 && p.pred[i] <= 1.0)) {
      throw DataError("EvalPair: prediction " + std::to_string(p.pred[i]) + " at pixel " + std::to_string(i) +
                      " outside [0,1]");
    }
    if (p.gt[i] > 1) throw DataError("EvalPair: ground truth not binary at pixel " + std::to_string(i));
  }
}

inline constexpr std::size_t kThresholds = 256;

/// k/255; a pixel is foreground at level k when pred >= threshold(k).
inline double threshold(std::size_t k) { return static_cast<double>(k) / 255.0; }

/// Confusion counts of the binarized map at every threshold level.
struct ThresholdCounts {
  std::uint64_t positives = 0;  // gt foreground pixels
  std::uint64_t negatives = 0;
  std::array<std::uint64_t, kThresholds> tp{};
  std::array<std::uint64_t, kThresholds> fp{};

  std::uint64_t total() const { return positives + negatives; }
  std::uint64_t fn(std::size_t k) const { return positives - tp[k]; }
  std::uint64_t tn(std::size_t k) const { return negatives - fp[k]; }

  ThresholdCounts& operator+=(const ThresholdCounts& o) {
    positives += o.positives;
    negatives += o.negatives;
    for (std::size_t k = 0; k < kThresholds; ++k) {
      tp[k] += o.tp[k];
      fp[k] += o.fp[k];
    }
    return *this;
  }
};

/// Highest level k with v >= k/255.
inline std::size_t threshold_level(double v) {
  auto k = static_cast<std::size_t>(std::clamp(std::floor(v * 255.0), 0.0, 255.0));
  while (k < 255 && v >= threshold(k + 1)) ++k;
  while (k > 0 && v < threshold(k)) --k;
  return k;
}

/// Histogram by level, then suffix sums: O(pixels + 256).
inline ThresholdCounts count_thresholds(const EvalPair& p) {
  std::array<std::uint64_t, kThresholds> hist_pos{}, hist_neg{};
  ThresholdCounts c;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const std::size_t k = threshold_level(p.pred[i]);
    if (p.gt[i] != 0) {
      ++hist_pos[k];
      ++c.positives;
    } else {
      ++hist_neg[k];
      ++c.negatives;
    }
  }
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t k = kThresholds; k-- > 0;) {
    tp += hist_pos[k];
    fp += hist_neg[k];
    c.tp[k] = tp;
    c.fp[k] = fp;
  }
  return c;
}

inline constexpr double kFBetaSquared = 0.3;

/// F_β at level k; 0 when precision or recall is undefined.
inline double f_measure_at(const ThresholdCounts& c, std::size_t k, double beta2 = kFBetaSquared) {
  const std::uint64_t predicted = c.tp[k] + c.fp[k];
  if (predicted == 0 || c.positives == 0) return 0.0;
  const double precision = static_cast<double>(c.tp[k]) / static_cast<double>(predicted);
  const double recall = static_cast<double>(c.tp[k]) / static_cast<double>(c.positives);
  const double denom = beta2 * precision + recall;
  return denom > 0.0 ? (1.0 + beta2) * precision * recall / denom : 0.0;
}

inline constexpr double kEMeasureEps = 1e-8;

/// Enhanced-alignment measure of the level-k binarization. The aligned maps
/// take one value per (B, G) combination, so the pixel mean reduces to a
/// count-weighted sum of four terms. All-background gt scores 1 − mean(B);
/// all-foreground gt scores mean(B).
inline double e_measure_at(const ThresholdCounts& c, std::size_t k) {
  const auto n = static_cast<double>(c.total());
  if (c.total() == 0) return 0.0;
  const double predicted = static_cast<double>(c.tp[k] + c.fp[k]);
  if (c.positives == 0) return 1.0 - predicted / n;
  if (c.negatives == 0) return predicted / n;
  const double mean_b = predicted / n;
  const double mean_g = static_cast<double>(c.positives) / n;
  auto enhanced = [&](double b, double g) {
    const double ab = b - mean_b, ag = g - mean_g;
    const double phi = 2.0 * ab * ag / (ab * ab + ag * ag + kEMeasureEps);
    return (1.0 + phi) * (1.0 + phi) / 4.0;
  };
  const double sum = static_cast<double>(c.tp[k]) * enhanced(1, 1) + static_cast<double>(c.fp[k]) * enhanced(1, 0) +
                     static_cast<double>(c.fn(k)) * enhanced(0, 1) + static_cast<double>(c.tn(k)) * enhanced(0, 0);
  return sum / n;
}

}  // namespace lpca
