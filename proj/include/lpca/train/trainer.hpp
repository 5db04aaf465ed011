#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lpca/data/checkpoint.hpp"
#include "lpca/data/sample.hpp"
#include "lpca/metrics/dataset.hpp"
#include "lpca/model/lpcanet.hpp"
#include "lpca/train/adamw.hpp"
#include "lpca/train/augment.hpp"
#include "lpca/train/loss.hpp"
#include "lpca/train/schedule.hpp"

namespace lpca {

struct TrainPlan {
  std::size_t epochs = 100;
  std::size_t batch_size = 8;
  double lr_base = 1e-4;
  double lr_min = 1e-6;
  double weight_decay = 0.05;
  std::size_t max_steps = 0;         // 0: run every epoch in full
  std::size_t checkpoint_every = 0;  // epochs; 0 keeps only last.ckpt
  std::size_t eval_every = 1;        // epochs; the final epoch is always evaluated
  std::uint64_t seed = 0;
  bool augment = true;
  AugmentSpec augment_spec{};
};

inline TrainPlan train_plan_for(const std::string& preset) {
  TrainPlan p;
  if (preset == "tiny") {
    p.epochs = 50;
    p.batch_size = 4;
    p.lr_base = 3e-3;
    p.lr_min = 3e-5;
  }
  return p;
}

inline void validate(const TrainPlan& p) {
  if (p.epochs == 0 || p.batch_size == 0 || p.eval_every == 0) {
    throw ConfigError("train plan: epochs, batch size and eval cadence must be positive");
  }
  if (!(p.lr_base >= 0.0) || !(p.lr_min >= 0.0) || p.lr_min > p.lr_base) {
    throw ConfigError("train plan: need 0 <= lr_min <= lr_base");
  }
  if (!(p.weight_decay >= 0.0)) throw ConfigError("train plan: weight decay must be non-negative");
  validate(p.augment_spec);
}

struct LogRow {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double lr = 0;
  double loss = 0;  // mean training loss over the epoch's steps
  std::optional<MetricReport> metrics;
};

inline void write_log_csv(std::ostream& out, const std::vector<LogRow>& rows) {
  out << "epoch,step,lr,loss,mAP,IoU,MAE,maxF,maxE,S\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    out << r.epoch << ',' << r.step << ',' << num(r.lr) << ',' << num(r.loss);
    if (r.metrics) {
      const auto& m = *r.metrics;
      for (double v : {m.map, m.iou, m.mae, m.max_f, m.max_e, m.s}) out << ',' << num(v);
    } else {
      out << ",,,,,,";
    }
    out << '\n';
  }
}

struct TrainResult {
  std::vector<LogRow> log;
  std::vector<double> step_losses;
  std::size_t steps = 0;
};

/// Eval-mode probability maps, one H·W vector per sample.
template <class T>
std::vector<std::vector<double>> predict(LPCANet<T>& model, const std::vector<FloatSample>& samples,
                                         std::size_t batch_size = 4) {
  NoGradScope<T> no_grad;
  std::vector<std::vector<double>> out;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(samples.size(), start + batch_size); ++i) idx.push_back(i);
    const Batch<T> b = make_batch<T>(samples, idx);
    const Tensor<T> mask = model.forward(b.rgb, b.depth, Mode::kEval);
    const std::size_t hw = mask.shape().spatial();
    const auto d = mask.data();
    for (std::size_t k = 0; k < idx.size(); ++k) out.emplace_back(d.begin() + k * hw, d.begin() + (k + 1) * hw);
  }
  return out;
}

inline EvalPair eval_pair(const FloatSample& s, std::vector<double> pred) {
  EvalPair p{s.height, s.width, std::move(pred), std::vector<std::uint8_t>(s.mask.size())};
  for (std::size_t i = 0; i < s.mask.size(); ++i) p.gt[i] = s.mask[i] > 0.5F ? 1 : 0;
  return p;
}

template <class T>
MetricReport evaluate(LPCANet<T>& model, const std::vector<FloatSample>& samples, std::size_t batch_size = 4,
                      MetricAccumulator* acc_out = nullptr) {
  if (samples.empty()) throw DataError("evaluate: no samples");
  MetricAccumulator local;
  MetricAccumulator& acc = acc_out ? *acc_out : local;
  const auto preds = predict(model, samples, batch_size);
  for (std::size_t i = 0; i < samples.size(); ++i) acc.add(eval_pair(samples[i], preds[i]), samples[i].id);
  return acc.report();
}

/// Splits a shuffled epoch into batches. A trailing batch of one sample is
/// folded away because train-mode batch norm needs two values per channel
/// at the 1×1 bottleneck of small inputs.
inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n; s += batch_size) out.emplace_back(order.begin() + s, order.begin() + std::min(n, s + batch_size));
  if (out.size() > 1 && out.back().size() == 1) out.pop_back();
  return out;
}

inline std::size_t batches_per_epoch(std::size_t n, std::size_t batch_size) {
  const std::size_t full = (n + batch_size - 1) / batch_size;
  return full > 1 && n % batch_size == 1 ? full - 1 : full;
}

/// Seeded AdamW training with a per-step cosine schedule. When `out_dir` is
/// given, the log CSV is rewritten atomically after every epoch and the
/// model is saved to last.ckpt (and epoch_NNN.ckpt at the checkpoint
/// cadence). A non-finite loss aborts with NumericError before the update,
/// so last.ckpt still holds the last good epoch.
template <class T>
TrainResult train(LPCANet<T>& model, const std::vector<FloatSample>& train_set,
                  const std::vector<FloatSample>& eval_set, const TrainPlan& plan,
                  const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                  const std::function<void(const LogRow&)>& on_epoch = {}) {
  validate(plan);
  if (train_set.empty()) throw DataError("train: empty training set");
  AdamW<T> opt(model.parameters(), AdamWOptions{0.9, 0.999, 1e-8, plan.weight_decay});
  const std::size_t per_epoch = batches_per_epoch(train_set.size(), plan.batch_size);
  const std::size_t total = plan.max_steps ? plan.max_steps : plan.epochs * per_epoch;
  TrainResult result;
  Rng root(plan.seed);

  auto save_log = [&] {
    std::ostringstream csv;
    write_log_csv(csv, result.log);
    const std::string s = csv.str();
    detail::write_file_atomic(*out_dir / "train_log.csv", std::vector<std::uint8_t>(s.begin(), s.end()));
  };

  for (std::size_t epoch = 1; epoch <= plan.epochs && result.steps < total; ++epoch) {
    Rng epoch_rng = root.fork(epoch);
    const auto batches = epoch_batches(train_set.size(), plan.batch_size, epoch_rng);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    double lr = plan.lr_base;
    for (const auto& idx : batches) {
      if (result.steps >= total) break;
      std::vector<FloatSample> chunk;
      std::vector<std::size_t> local(idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) {
        Rng draw = epoch_rng.fork(idx[k]);
        chunk.push_back(plan.augment ? augment(train_set[idx[k]], plan.augment_spec, draw) : train_set[idx[k]]);
        local[k] = k;
      }
      const Batch<T> b = make_batch<T>(chunk, local);
      lr = cosine_lr(result.steps, total, plan.lr_base, plan.lr_min);
      opt.zero_grad();
      const Tensor<T> loss =
          backward_of<T>([&] { return bce_loss(model.forward(b.rgb, b.depth, Mode::kTrain), b.mask); });
      const double value = static_cast<double>(loss.item());
      if (!std::isfinite(value)) {
        throw NumericError("train: non-finite loss at step " + std::to_string(result.steps + 1) + " (epoch " +
                           std::to_string(epoch) + "); last good checkpoint kept");
      }
      opt.step(lr);
      ++result.steps;
      result.step_losses.push_back(value);
      loss_sum += value;
      ++loss_count;
    }
    LogRow row{epoch, result.steps, lr, loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0, {}};
    const bool last = epoch == plan.epochs || result.steps >= total;
    if (!eval_set.empty() && (last || epoch % plan.eval_every == 0)) row.metrics = evaluate(model, eval_set);
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);
    if (out_dir) {
      save_log();
      save_module(model, *out_dir / "last.ckpt");
      if (plan.checkpoint_every && epoch % plan.checkpoint_every == 0) {
        char name[32];
        std::snprintf(name, sizeof name, "epoch_%03zu.ckpt", epoch);
        save_module(model, *out_dir / name);
      }
    }
  }
  return result;
}

}  // namespace lpca
