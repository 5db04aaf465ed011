#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance driver. They recompute results straight from the definitions,
// trading speed for obviousness.

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "lpca/core/rng.hpp"
#include "lpca/metrics/dataset.hpp"
#include "lpca/model/cam.hpp"

namespace lpca::testing {

inline EvalPair make_pair(std::size_t h, std::size_t w, std::vector<double> pred, std::vector<std::uint8_t> gt) {
  return EvalPair{h, w, std::move(pred), std::move(gt)};
}

// Real-valued prediction and a blob-like random mask. Some predictions are
// snapped to exact threshold levels to exercise the >= boundary.
inline EvalPair random_pair(std::size_t h, std::size_t w, std::uint64_t seed, double fg = 0.3) {
  Rng rng(seed);
  EvalPair p{h, w, std::vector<double>(h * w), std::vector<std::uint8_t>(h * w)};
  for (std::size_t i = 0; i < h * w; ++i) {
    p.gt[i] = rng.bernoulli(fg) ? 1 : 0;
    double v = std::clamp(0.6 * p.gt[i] + rng.uniform(-0.35, 0.55), 0.0, 1.0);
    if (rng.bernoulli(0.2)) v = static_cast<double>(rng.uniform_int(0, 255)) / 255.0;
    p.pred[i] = v;
  }
  return p;
}

inline EvalPair from_gt(std::size_t h, std::size_t w, const std::vector<std::uint8_t>& gt, double scale = 1.0) {
  std::vector<double> pred(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) pred[i] = scale * gt[i];
  return make_pair(h, w, pred, gt);
}

inline std::vector<std::uint8_t> half_mask(std::size_t n, bool left) {
  std::vector<std::uint8_t> m(n * n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) m[r * n + c] = left ? (c < n / 2) : (r < n / 2);
  return m;
}

// Exhaustive per-threshold recount straight from the pixel definition.
inline ThresholdCounts brute_counts(const EvalPair& p) {
  ThresholdCounts c;
  for (std::size_t i = 0; i < p.size(); ++i) (p.gt[i] ? c.positives : c.negatives)++;
  for (std::size_t k = 0; k < kThresholds; ++k) {
    const double t = static_cast<double>(k) / 255.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p.pred[i] >= t) (p.gt[i] ? c.tp[k] : c.fp[k])++;
    }
  }
  return c;
}

inline double brute_f(const EvalPair& p, double t) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool b = p.pred[i] >= t;
    tp += b && p.gt[i];
    fp += b && !p.gt[i];
    fn += !b && p.gt[i];
  }
  if (tp + fp == 0 || tp + fn == 0) return 0.0;
  const double prec = tp / (tp + fp), rec = tp / (tp + fn);
  if (0.3 * prec + rec == 0) return 0.0;
  return 1.3 * prec * rec / (0.3 * prec + rec);
}

// Enhanced alignment evaluated pixel by pixel on the aligned matrices.
inline double direct_e(const EvalPair& p, double t) {
  const std::size_t n = p.size();
  std::vector<double> b(n), g(n);
  for (std::size_t i = 0; i < n; ++i) {
    b[i] = p.pred[i] >= t ? 1.0 : 0.0;
    g[i] = p.gt[i];
  }
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
  const double mg = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(n);
  double sum = 0;
  if (mg == 0.0) {
    for (double v : b) sum += 1.0 - v;
  } else if (mg == 1.0) {
    for (double v : b) sum += v;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double ab = b[i] - mb, ag = g[i] - mg;
      const double phi = 2 * ab * ag / (ab * ab + ag * ag + 1e-8);
      sum += (1 + phi) * (1 + phi) / 4;
    }
  }
  return sum / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Clean-room structure measure written as a 1-based matrix translation.

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const std::vector<double>& v, std::size_t h, std::size_t w) {
  Mat m(h, std::vector<double>(w));
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) m[r][c] = v[r * w + c];
  return m;
}

inline Mat sub(const Mat& m, std::size_t r1, std::size_t r2, std::size_t c1, std::size_t c2) {  // inclusive, 1-based
  Mat out;
  for (std::size_t r = r1; r <= r2; ++r) {
    std::vector<double> row;
    for (std::size_t c = c1; c <= c2; ++c) row.push_back(m[r - 1][c - 1]);
    out.push_back(row);
  }
  return out;
}

inline double oracle_ssim(const Mat& pred, const Mat& gt) {
  double N = 0, x = 0, y = 0;
  for (std::size_t r = 0; r < pred.size(); ++r)
    for (std::size_t c = 0; c < pred[r].size(); ++c) {
      x += pred[r][c];
      y += gt[r][c];
      N += 1;
    }
  x /= N;
  y /= N;
  double sx = 0, sy = 0, sxy = 0;
  for (std::size_t r = 0; r < pred.size(); ++r)
    for (std::size_t c = 0; c < pred[r].size(); ++c) {
      sx += (pred[r][c] - x) * (pred[r][c] - x);
      sy += (gt[r][c] - y) * (gt[r][c] - y);
      sxy += (pred[r][c] - x) * (gt[r][c] - y);
    }
  sx /= (N - 1 + DBL_EPSILON);
  sy /= (N - 1 + DBL_EPSILON);
  sxy /= (N - 1 + DBL_EPSILON);
  const double a = 4 * x * y * sxy, b = (x * x + y * y) * (sx + sy);
  if (a != 0) return a / (b + DBL_EPSILON);
  if (a == 0 && b == 0) return 1.0;
  return 0.0;
}

inline double oracle_object(const std::vector<double>& vals) {
  const double n = static_cast<double>(vals.size());
  const double x = std::accumulate(vals.begin(), vals.end(), 0.0) / n;
  double var = 0;
  for (double v : vals) var += (v - x) * (v - x);
  const double sd = vals.size() > 1 ? std::sqrt(var / (n - 1)) : 0.0;
  return 2.0 * x / (x * x + 1.0 + sd + DBL_EPSILON);
}

inline double oracle_s(const EvalPair& p) {
  const std::size_t H = p.height, W = p.width;
  const Mat P = to_mat(p.pred, H, W);
  std::vector<double> gv(p.gt.begin(), p.gt.end());
  const Mat G = to_mat(gv, H, W);
  const double y = std::accumulate(gv.begin(), gv.end(), 0.0) / static_cast<double>(H * W);
  const double xbar = std::accumulate(p.pred.begin(), p.pred.end(), 0.0) / static_cast<double>(H * W);
  if (y == 0) return 1.0 - xbar;
  if (y == 1) return xbar;

  std::vector<double> fg, bg;
  for (std::size_t i = 0; i < H * W; ++i) (p.gt[i] ? fg : bg).push_back(p.gt[i] ? p.pred[i] : 1.0 - p.pred[i]);
  const double so = y * oracle_object(fg) + (1 - y) * oracle_object(bg);

  double total = 0, xs = 0, ys = 0;
  for (std::size_t i = 1; i <= H; ++i)
    for (std::size_t j = 1; j <= W; ++j) {
      total += G[i - 1][j - 1];
      xs += G[i - 1][j - 1] * static_cast<double>(j);
      ys += G[i - 1][j - 1] * static_cast<double>(i);
    }
  const auto X = static_cast<std::size_t>(std::round(xs / total));
  const auto Y = static_cast<std::size_t>(std::round(ys / total));
  const double area = static_cast<double>(H * W);
  const double w1 = static_cast<double>(X * Y) / area, w2 = static_cast<double>((W - X) * Y) / area,
               w3 = static_cast<double>(X * (H - Y)) / area, w4 = 1.0 - w1 - w2 - w3;
  double sr = 0;
  if (X > 0 && Y > 0) sr += w1 * oracle_ssim(sub(P, 1, Y, 1, X), sub(G, 1, Y, 1, X));
  if (X < W && Y > 0) sr += w2 * oracle_ssim(sub(P, 1, Y, X + 1, W), sub(G, 1, Y, X + 1, W));
  if (X > 0 && Y < H) sr += w3 * oracle_ssim(sub(P, Y + 1, H, 1, X), sub(G, Y + 1, H, 1, X));
  if (X < W && Y < H) sr += w4 * oracle_ssim(sub(P, Y + 1, H, X + 1, W), sub(G, Y + 1, H, X + 1, W));
  return std::max(0.0, 0.5 * so + 0.5 * sr);
}

// Pooled AP as the sum over distinct recall levels of the best precision
// achieved at that recall or above.
inline double oracle_ap(const std::vector<EvalPair>& pairs) {
  double pos = 0;
  std::vector<double> tp(256, 0), fp(256, 0);
  for (const auto& p : pairs)
    for (std::size_t i = 0; i < p.size(); ++i) {
      pos += p.gt[i];
      for (std::size_t k = 0; k < 256; ++k)
        if (p.pred[i] >= static_cast<double>(k) / 255.0) (p.gt[i] ? tp[k] : fp[k]) += 1;
    }
  if (pos == 0) return 0.0;
  std::vector<std::pair<double, double>> pts;  // (recall, precision)
  for (std::size_t k = 0; k < 256; ++k) pts.emplace_back(tp[k] / pos, tp[k] + fp[k] > 0 ? tp[k] / (tp[k] + fp[k]) : 0.0);
  std::vector<double> levels;
  for (const auto& q : pts) levels.push_back(q.first);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  double ap = 0, prev = 0;
  for (double r : levels) {
    double best = 0;
    for (const auto& q : pts)
      if (q.first >= r) best = std::max(best, q.second);
    ap += (r - prev) * best;
    prev = r;
  }
  return ap;
}


// ---------------------------------------------------------------------------
// Step-by-step dense recomputation of the attention block on raw arrays.
inline std::vector<double> cam_oracle(const std::vector<double>& fr, const std::vector<double>& fd, std::size_t cr,
                               std::size_t cd, std::size_t cc, std::size_t heads, std::size_t L,
                               CrossAttention<double>& cam) {
  auto project = [&](Linear<double>& lin, const std::vector<double>& f, std::size_t cin) {
    std::vector<double> out(L * cc);
    const auto w = lin.weight().data();
    const auto b = lin.bias().data();
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t o = 0; o < cc; ++o) {
        double s = b[o];
        for (std::size_t i = 0; i < cin; ++i) s += w[o * cin + i] * f[i * L + l];  // token l, channel i
        out[l * cc + o] = s;
      }
    return out;
  };
  const auto q = project(cam.query(), fr, cr);
  const auto k = project(cam.key(), fd, cd);
  const auto v = project(cam.value(), fd, cd);
  const std::size_t dz = cc / heads;
  std::vector<double> merged(L * cc, 0.0);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < L; ++i) {
      std::vector<double> logits(L);
      for (std::size_t j = 0; j < L; ++j) {
        double s = 0;
        for (std::size_t d = 0; d < dz; ++d) s += q[i * cc + h * dz + d] * k[j * cc + h * dz + d];
        logits[j] = s / std::sqrt(static_cast<double>(dz));
      }
      const double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0;
      for (auto& x : logits) z += (x = std::exp(x - mx));
      for (std::size_t j = 0; j < L; ++j)
        for (std::size_t d = 0; d < dz; ++d) merged[i * cc + h * dz + d] += logits[j] / z * v[j * cc + h * dz + d];
    }
  }
  std::vector<double> out(cc * L);
  const auto w = cam.output().weight().data();
  const auto b = cam.output().bias().data();
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t o = 0; o < cc; ++o) {
      double s = b[o];
      for (std::size_t i = 0; i < cc; ++i) s += w[o * cc + i] * merged[l * cc + i];
      out[o * L + l] = s;  // back to (C, h, w)
    }
  return out;
}

}  // namespace lpca::testing
