#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "lpca/core/rng.hpp"
#include "lpca/metrics/dataset.hpp"
#include "oracles.hpp"

namespace lpca {
namespace {

using namespace lpca::testing;

TEST(Thresholds, LevelMatchesDefinitionAtBoundaries) {
  for (std::size_t k = 0; k < 256; ++k) {
    EXPECT_EQ(threshold_level(threshold(k)), k);
    if (k > 0) {
      EXPECT_EQ(threshold_level(std::nextafter(threshold(k), 0.0)), k - 1);
    }
  }
  EXPECT_EQ(threshold_level(1.0), 255u);
  EXPECT_EQ(threshold_level(0.0), 0u);
}

TEST(Thresholds, HistogramCountsEqualBruteForce) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = random_pair(16, 16, seed);
    const auto a = count_thresholds(p), b = brute_counts(p);
    EXPECT_EQ(a.positives, b.positives);
    EXPECT_EQ(a.tp, b.tp);
    EXPECT_EQ(a.fp, b.fp);
  }
}

TEST(EvalPair, ValidationRejectsMalformedInput) {
  EXPECT_THROW(mae(make_pair(2, 2, {0, 0, 0}, {0, 0, 0, 0})), DataError);
  EXPECT_THROW(mae(make_pair(1, 2, {0, 1.5}, {0, 1})), DataError);
  EXPECT_THROW(mae(make_pair(1, 2, {0, NAN}, {0, 1})), DataError);
  EXPECT_THROW(mae(make_pair(1, 2, {0, 1}, {0, 2})), DataError);
}

TEST(Mae, Examples) {
  const auto gt = half_mask(4, true);
  EXPECT_EQ(mae(from_gt(4, 4, gt)), 0.0);
  EXPECT_EQ(mae(make_pair(2, 2, {1, 1, 1, 1}, {0, 0, 0, 0})), 1.0);
  EXPECT_EQ(mae(make_pair(2, 2, {.25, .25, .25, .25}, {0, 0, 0, 0})), 0.25);
}

TEST(Mae, ComplementSumsToOne) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto p = random_pair(8, 8, seed);
    auto q = p;
    for (auto& v : q.pred) v = 1.0 - v;
    EXPECT_NEAR(mae(p) + mae(q), 1.0, 1e-12);
  }
}

TEST(Iou, Examples) {
  const auto left = half_mask(6, true), top = half_mask(6, false);
  EXPECT_EQ(iou(from_gt(6, 6, left)), 1.0);
  std::vector<std::uint8_t> right(left.size());
  for (std::size_t i = 0; i < left.size(); ++i) right[i] = 1 - left[i];
  EXPECT_EQ(iou(make_pair(6, 6, from_gt(6, 6, left).pred, right)), 0.0);
  EXPECT_NEAR(iou(make_pair(6, 6, from_gt(6, 6, left).pred, top)), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(iou(make_pair(1, 2, {0.1, 0.2}, {0, 0})), 1.0);  // empty union
}

TEST(Iou, EqualsDirectCountsAtAnyThreshold) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = random_pair(12, 9, seed);
    for (double t : {0.1, 0.5, 0.77}) {
      double tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const bool b = p.pred[i] >= t;
        tp += b && p.gt[i];
        fp += b && !p.gt[i];
        fn += !b && p.gt[i];
      }
      EXPECT_EQ(iou(p, t), tp / (tp + fp + fn));
    }
  }
}

TEST(FMeasure, Examples) {
  const auto gt = half_mask(8, true);
  EXPECT_NEAR(max_f_measure(from_gt(8, 8, gt)), 1.0, 1e-15);
  EXPECT_EQ(max_f_measure(make_pair(1, 3, {0.2, 0.9, 0.5}, {0, 0, 0})), 0.0);
  const auto c = count_thresholds(from_gt(8, 8, gt));
  for (std::size_t k = 1; k < 256; ++k) EXPECT_NEAR(f_measure_at(c, k), 1.0, 1e-15);
}

TEST(FMeasure, MaxEqualsBruteForceSweep) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = random_pair(8 + seed % 9, 16 - seed % 5, seed);
    double best = 0;
    for (std::size_t k = 0; k < 256; ++k) best = std::max(best, brute_f(p, static_cast<double>(k) / 255.0));
    EXPECT_NEAR(max_f_measure(p), best, 1e-12);
    const auto bc = brute_counts(p);
    double exact = 0;
    for (std::size_t k = 0; k < 256; ++k) exact = std::max(exact, f_measure_at(bc, k));
    EXPECT_EQ(max_f_measure(p), exact);
  }
}

TEST(EMeasure, Examples) {
  // The 1e-8 in the alignment denominator keeps a perfect match ~2e-8 below 1.
  const auto gt = half_mask(4, true);
  EXPECT_NEAR(max_e_measure(from_gt(4, 4, gt)), 1.0, 1e-7);
  std::vector<double> comp(16);
  for (std::size_t i = 0; i < 16; ++i) comp[i] = 1.0 - gt[i];
  const auto p = make_pair(4, 4, comp, gt);
  const auto c = count_thresholds(p);
  const double e = e_measure_at(c, 128);
  EXPECT_NEAR(e, direct_e(p, threshold(128)), 1e-12);
  EXPECT_LT(e, 0.25);
  EXPECT_EQ(max_e_measure(make_pair(1, 2, {0, 0}, {0, 0})), 1.0);
  EXPECT_EQ(e_measure_at(count_thresholds(make_pair(1, 2, {1, 1}, {0, 0})), 255), 0.0);
  EXPECT_EQ(e_measure_at(count_thresholds(make_pair(1, 2, {0, 0}, {1, 1})), 255), 0.0);
}

TEST(EMeasure, CountFormEqualsPerPixelEvaluation) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = random_pair(9, 11, seed, seed % 3 == 0 ? 0.0 : 0.4);
    const auto c = count_thresholds(p);
    for (std::size_t k = 0; k < 256; k += 5) EXPECT_NEAR(e_measure_at(c, k), direct_e(p, threshold(k)), 1e-12);
  }
}

TEST(EMeasure, MaxEqualsBruteForceSweep) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = random_pair(16, 16, seed + 30);
    const auto bc = brute_counts(p);
    double exact = 0, direct = 0;
    for (std::size_t k = 0; k < 256; ++k) {
      exact = std::max(exact, e_measure_at(bc, k));
      direct = std::max(direct, direct_e(p, static_cast<double>(k) / 255.0));
    }
    EXPECT_EQ(max_e_measure(p), exact);
    EXPECT_NEAR(max_e_measure(p), direct, 1e-12);
  }
}

TEST(SMeasure, Examples) {
  const auto gt = half_mask(8, true);
  EXPECT_NEAR(s_measure(from_gt(8, 8, gt)), 1.0, 1e-9);
  EXPECT_EQ(s_measure(make_pair(2, 2, {0, 0, 0, 0}, {0, 0, 0, 0})), 1.0);
  EXPECT_EQ(s_measure(make_pair(2, 2, {1, 1, 1, 1}, {0, 0, 0, 0})), 0.0);
  EXPECT_EQ(s_measure(make_pair(2, 2, {1, 1, 1, 1}, {1, 1, 1, 1})), 1.0);
}

TEST(SMeasure, FixedCaseMatchesCleanRoomImplementation) {
  // Off-center L-shaped defect on an 8×8 map with a soft prediction.
  std::vector<std::uint8_t> gt(64, 0);
  for (std::size_t r = 1; r < 6; ++r) gt[r * 8 + 2] = 1;
  for (std::size_t c = 2; c < 7; ++c) gt[5 * 8 + c] = 1;
  std::vector<double> pred(64);
  for (std::size_t i = 0; i < 64; ++i) pred[i] = gt[i] ? 0.55 + 0.05 * static_cast<double>(i % 7) : 0.03 * static_cast<double>(i % 9);
  const auto p = make_pair(8, 8, pred, gt);
  EXPECT_NEAR(s_measure(p), oracle_s(p), 1e-9);
  EXPECT_GT(s_measure(p), 0.5);
}

TEST(SMeasure, RandomCasesMatchCleanRoomImplementation) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = random_pair(5 + seed % 6, 4 + seed % 9, seed, 0.1 + 0.04 * static_cast<double>(seed % 10));
    EXPECT_NEAR(s_measure(p), oracle_s(p), 1e-9) << "seed " << seed;
  }
  // Centroid on the border leaves empty quadrants.
  std::vector<std::uint8_t> gt(16, 0);
  gt[0] = 1;
  const auto corner = make_pair(4, 4, std::vector<double>(16, 0.2), gt);
  EXPECT_NEAR(s_measure(corner), oracle_s(corner), 1e-9);
}

TEST(AveragePrecision, Examples) {
  const auto gt = half_mask(8, false);
  EXPECT_NEAR(mean_average_precision({from_gt(8, 8, gt)}), 1.0, 1e-15);
  EXPECT_NEAR(mean_average_precision({from_gt(8, 8, gt, 0.8)}), 1.0, 1e-15);
  std::vector<double> inv(64);
  for (std::size_t i = 0; i < 64; ++i) inv[i] = 1.0 - gt[i];
  const auto inverted = make_pair(8, 8, inv, gt);
  EXPECT_NEAR(mean_average_precision({inverted}), 0.5, 1e-15);  // foreground prior
  EXPECT_NEAR(mean_average_precision({inverted}), oracle_ap({inverted}), 1e-12);
  EXPECT_THROW(mean_average_precision({}), DataError);
}

TEST(AveragePrecision, PooledMatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    std::vector<EvalPair> pairs;
    for (std::uint64_t j = 0; j < 3; ++j) pairs.push_back(random_pair(10, 12, seed * 10 + j));
    EXPECT_NEAR(mean_average_precision(pairs), oracle_ap(pairs), 1e-12);
  }
}

TEST(Curves, PerfectPredictionAndMonotonicity) {
  const auto gt = half_mask(8, true);
  auto perfect = count_thresholds(from_gt(8, 8, gt));
  const auto pr = pr_curve(perfect);
  ASSERT_EQ(pr.size(), 256u);
  for (std::size_t k = 1; k < 256; ++k) {
    EXPECT_EQ(pr[k].precision, 1.0);
    EXPECT_EQ(pr[k].recall, 1.0);
  }
  EXPECT_NEAR(roc_auc(roc_curve(count_thresholds(from_gt(8, 8, gt, 0.8)))), 1.0, 1e-15);

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto roc = roc_curve(count_thresholds(random_pair(16, 16, seed)));
    for (std::size_t k = 1; k < roc.size(); ++k) {
      EXPECT_LE(roc[k].tpr, roc[k - 1].tpr);
      EXPECT_LE(roc[k].fpr, roc[k - 1].fpr);
      EXPECT_EQ(roc[k].threshold, static_cast<double>(k) / 255.0);
    }
  }
}

TEST(Properties, PixelPooledMeasuresIgnoreJointPermutation) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = random_pair(10, 10, seed);
    std::vector<std::size_t> perm(p.size());
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed + 77);
    for (std::size_t i = perm.size() - 1; i > 0; --i)
      std::swap(perm[i], perm[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)))]);
    EvalPair q = p;
    for (std::size_t i = 0; i < p.size(); ++i) {
      q.pred[i] = p.pred[perm[i]];
      q.gt[i] = p.gt[perm[i]];
    }
    EXPECT_NEAR(mae(p), mae(q), 1e-15);
    EXPECT_EQ(iou(p), iou(q));
    EXPECT_EQ(max_f_measure(p), max_f_measure(q));
    EXPECT_EQ(mean_average_precision({p}), mean_average_precision({q}));
  }
}

TEST(Properties, SelfComparisonIsOptimal) {
  std::vector<std::uint8_t> gt(100);
  Rng rng(5);
  for (auto& g : gt) g = rng.bernoulli(0.4) ? 1 : 0;
  const auto p = from_gt(10, 10, gt);
  EXPECT_EQ(mae(p), 0.0);
  EXPECT_EQ(iou(p), 1.0);
  EXPECT_NEAR(max_f_measure(p), 1.0, 1e-15);
  EXPECT_NEAR(max_e_measure(p), 1.0, 1e-7);
  EXPECT_NEAR(s_measure(p), 1.0, 1e-9);
  EXPECT_NEAR(mean_average_precision({p}), 1.0, 1e-15);
}

TEST(Accumulator, DatasetRowAggregatesImages) {
  MetricAccumulator acc;
  std::vector<EvalPair> pairs;
  for (std::uint64_t s = 0; s < 4; ++s) {
    pairs.push_back(random_pair(8, 8, s));
    acc.add(pairs.back(), "img" + std::to_string(s));
  }
  const MetricReport r = acc.report();
  double m = 0, s_sum = 0;
  std::array<double, 256> f{};
  for (const auto& p : pairs) {
    m += mae(p) / 4;
    s_sum += s_measure(p) / 4;
    const auto c = count_thresholds(p);
    for (std::size_t k = 0; k < 256; ++k) f[k] += f_measure_at(c, k) / 4;
  }
  EXPECT_NEAR(r.mae, m, 1e-15);
  EXPECT_NEAR(r.s, s_sum, 1e-15);
  EXPECT_NEAR(r.max_f, *std::max_element(f.begin(), f.end()), 1e-15);
  EXPECT_NEAR(r.map, mean_average_precision(pairs), 1e-15);
  EXPECT_EQ(acc.images()[2].name, "img2");
  EXPECT_EQ(acc.images()[2].max_f, max_f_measure(pairs[2]));

  std::ostringstream metrics, pr, roc;
  write_metrics_csv(metrics, acc.images(), r);
  write_pr_csv(pr, r.pr);
  write_roc_csv(roc, r.roc);
  EXPECT_EQ(metrics.str().substr(0, metrics.str().find('\n')), "image,mAP,IoU,MAE,maxF,maxE,S");
  EXPECT_EQ(pr.str().substr(0, pr.str().find('\n')), "threshold,precision,recall");
  EXPECT_EQ(roc.str().substr(0, roc.str().find('\n')), "threshold,fpr,tpr");
  const std::string pr_text = pr.str();
  EXPECT_EQ(std::count(pr_text.begin(), pr_text.end(), '\n'), 257);
  EXPECT_THROW(MetricAccumulator().report(), DataError);
}

}  // namespace
}  // namespace lpca
