#pragma once

#include <algorithm>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "lpca/metrics/measures.hpp"

namespace lpca {

struct PrPoint {
  double threshold, precision, recall;
};

struct RocPoint {
  double threshold, fpr, tpr;
};

/// Precision at level k, 0 when nothing is predicted.
inline double precision_at(const ThresholdCounts& c, std::size_t k) {
  const std::uint64_t predicted = c.tp[k] + c.fp[k];
  return predicted == 0 ? 0.0 : static_cast<double>(c.tp[k]) / static_cast<double>(predicted);
}

inline double recall_at(const ThresholdCounts& c, std::size_t k) {
  return c.positives == 0 ? 0.0 : static_cast<double>(c.tp[k]) / static_cast<double>(c.positives);
}

inline std::vector<PrPoint> pr_curve(const ThresholdCounts& c) {
  std::vector<PrPoint> out;
  for (std::size_t k = 0; k < kThresholds; ++k) out.push_back({threshold(k), precision_at(c, k), recall_at(c, k)});
  return out;
}

inline std::vector<RocPoint> roc_curve(const ThresholdCounts& c) {
  std::vector<RocPoint> out;
  for (std::size_t k = 0; k < kThresholds; ++k) {
    const double fpr = c.negatives == 0 ? 0.0 : static_cast<double>(c.fp[k]) / static_cast<double>(c.negatives);
    out.push_back({threshold(k), fpr, recall_at(c, k)});
  }
  return out;
}

/// Area under the pooled PR curve by all-point interpolation: recall is
/// swept upward (threshold downward), precision replaced by its running
/// maximum from the right, and the area summed as steps. No positives → 0.
inline double average_precision(const ThresholdCounts& c) {
  if (c.positives == 0) return 0.0;
  std::vector<double> rec{0.0}, prec{0.0};
  for (std::size_t k = kThresholds; k-- > 0;) {
    rec.push_back(recall_at(c, k));
    prec.push_back(precision_at(c, k));
  }
  rec.push_back(1.0);
  prec.push_back(0.0);
  for (std::size_t i = prec.size() - 1; i-- > 0;) prec[i] = std::max(prec[i], prec[i + 1]);
  double ap = 0.0;
  for (std::size_t i = 0; i + 1 < rec.size(); ++i) {
    if (rec[i + 1] != rec[i]) ap += (rec[i + 1] - rec[i]) * prec[i + 1];
  }
  return ap;
}

inline double mean_average_precision(const std::vector<EvalPair>& pairs) {
  if (pairs.empty()) throw DataError("mean_average_precision: no pairs");
  ThresholdCounts pooled;
  for (const auto& p : pairs) {
    validate(p);
    pooled += count_thresholds(p);
  }
  return average_precision(pooled);
}

/// Trapezoidal ROC area between (0,0) and (1,1).
inline double roc_auc(const std::vector<RocPoint>& roc) {
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}, {1.0, 1.0}};
  for (const auto& p : roc) pts.emplace_back(p.fpr, p.tpr);
  std::sort(pts.begin(), pts.end());
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    area += (pts[i + 1].first - pts[i].first) * (pts[i + 1].second + pts[i].second) / 2.0;
  return area;
}

struct ImageMetrics {
  std::string name;
  double mae = 0, iou = 0, max_f = 0, max_e = 0, s = 0;
};

/// Dataset row: MAE, IoU and S averaged over images; maxF and maxE are the
/// maxima of the threshold-wise mean F and E curves; mAP from pooled pixels.
struct MetricReport {
  double map = 0, iou = 0, mae = 0, max_f = 0, max_e = 0, s = 0;
  std::vector<PrPoint> pr;
  std::vector<RocPoint> roc;
};

class MetricAccumulator {
 public:
  const ImageMetrics& add(const EvalPair& p, std::string name = {}) {
    validate(p);
    const ThresholdCounts c = count_thresholds(p);
    ImageMetrics m;
    m.name = std::move(name);
    m.mae = mae(p);
    m.iou = iou(p);
    m.s = s_measure(p);
    for (std::size_t k = 0; k < kThresholds; ++k) {
      const double f = f_measure_at(c, k), e = e_measure_at(c, k);
      f_sum_[k] += f;
      e_sum_[k] += e;
      m.max_f = std::max(m.max_f, f);
      m.max_e = std::max(m.max_e, e);
    }
    pooled_ += c;
    images_.push_back(std::move(m));
    return images_.back();
  }

  const std::vector<ImageMetrics>& images() const { return images_; }

  MetricReport report() const {
    if (images_.empty()) throw DataError("MetricAccumulator: no images");
    MetricReport r;
    const auto n = static_cast<double>(images_.size());
    for (const auto& m : images_) {
      r.mae += m.mae / n;
      r.iou += m.iou / n;
      r.s += m.s / n;
    }
    for (std::size_t k = 0; k < kThresholds; ++k) {
      r.max_f = std::max(r.max_f, f_sum_[k] / n);
      r.max_e = std::max(r.max_e, e_sum_[k] / n);
    }
    r.map = average_precision(pooled_);
    r.pr = pr_curve(pooled_);
    r.roc = roc_curve(pooled_);
    return r;
  }

 private:
  std::vector<ImageMetrics> images_;
  std::array<double, kThresholds> f_sum_{}, e_sum_{};
  ThresholdCounts pooled_;
};

inline void write_metrics_csv(std::ostream& out, const std::vector<ImageMetrics>& images, const MetricReport& r) {
  out << "image,mAP,IoU,MAE,maxF,maxE,S\n";
  out.precision(10);
  for (const auto& m : images) out << m.name << ",," << m.iou << ',' << m.mae << ',' << m.max_f << ',' << m.max_e << ',' << m.s << '\n';
  out << "dataset," << r.map << ',' << r.iou << ',' << r.mae << ',' << r.max_f << ',' << r.max_e << ',' << r.s << '\n';
}

inline void write_pr_csv(std::ostream& out, const std::vector<PrPoint>& pr) {
  out << "threshold,precision,recall\n";
  out.precision(10);
  for (const auto& p : pr) out << p.threshold << ',' << p.precision << ',' << p.recall << '\n';
}

inline void write_roc_csv(std::ostream& out, const std::vector<RocPoint>& roc) {
  out << "threshold,fpr,tpr\n";
  out.precision(10);
  for (const auto& p : roc) out << p.threshold << ',' << p.fpr << ',' << p.tpr << '\n';
}

}  // namespace lpca
