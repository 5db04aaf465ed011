// lpca: synthetic data, training, evaluation, inference and diagnostics for
// the LPCANet RGB-D rail-defect segmenter.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 numeric failure (non-finite loss, failed gradient check).

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lpca/data/checkpoint.hpp"
#include "lpca/data/netpbm.hpp"
#include "lpca/data/sample.hpp"
#include "lpca/data/synth.hpp"
#include "lpca/diagnostics/gradcheck_suite.hpp"
#include "lpca/metrics/dataset.hpp"
#include "lpca/model/accounting.hpp"
#include "lpca/model/lpcanet.hpp"
#include "lpca/run_config.hpp"
#include "lpca/train/trainer.hpp"

namespace {

using namespace lpca;
namespace fs = std::filesystem;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

// Reference figures for the paper preset at 320×320.
constexpr double kPaperParamsM = 9.90;
constexpr double kPaperFlopsG = 2.50;
constexpr double kPaperFps = 162.60;

std::size_t thread_cap() {
  const char* v = std::getenv("LPCA_THREADS");
  if (v == nullptr || *v == '\0') return 1;
  const std::size_t n = detail::parse_size("LPCA_THREADS", v);
  if (n == 0) throw ConfigError("LPCA_THREADS must be a positive integer");
  return n;
}

void prepare_out_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_directory(dir)) throw ConfigError("'" + dir.string() + "' is not a directory");
  if (fs::exists(dir) && !fs::is_empty(dir) && !force) {
    throw ConfigError("output directory '" + dir.string() + "' is not empty (use --force to overwrite)");
  }
  fs::create_directories(dir);
}

void write_text(const fs::path& path, const std::string& s) {
  detail::write_file_atomic(path, std::vector<std::uint8_t>(s.begin(), s.end()));
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

/// Rebuilds the config for a new input size; a size the architecture cannot
/// take is a property of the data, so it is reported as a data error.
ModelConfig fit_input(ModelConfig c, std::size_t h, std::size_t w) {
  c.input_h = h;
  c.input_w = w;
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw DataError("images are " + std::to_string(h) + "x" + std::to_string(w) + ": " + e.what());
  }
  return c;
}

ModelConfig config_for_checkpoint(const fs::path& checkpoint, const std::string& config_path) {
  const fs::path p = config_path.empty() ? checkpoint.parent_path() / "config.resolved" : fs::path(config_path);
  if (!fs::exists(p)) {
    throw ConfigError("no model config at '" + p.string() + "'; pass --config with the run's config.resolved");
  }
  return read_config(read_key_values(p), paper_config());
}

std::vector<std::uint8_t> to_levels(const std::vector<double>& prob) {
  std::vector<std::uint8_t> out(prob.size());
  for (std::size_t i = 0; i < prob.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(prob[i], 0.0, 1.0) * 255.0));
  }
  return out;
}

struct LoadedSplit {
  std::vector<FloatSample> train, test;
  std::size_t binarized = 0;
};

LoadedSplit load_split(const fs::path& manifest, const std::optional<std::string>& only = std::nullopt) {
  LoadedSplit out;
  for (const auto& r : load_manifest(manifest, only)) {
    FloatSample s = to_float(load_sample(r, &out.binarized));
    (r.split == "test" ? out.test : out.train).push_back(std::move(s));
  }
  if (out.binarized) {
    std::cerr << "warning: " << out.binarized << " mask pixels were not 0/255 and were binarized at 128\n";
  }
  return out;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string out, config, size, defects;
  std::size_t n = 64, test = 0;
  std::uint64_t seed = 0;
  bool force = false;
};

int cmd_synth(const SynthArgs& a, const CLI::App& app) {
  KeyValues kv = a.config.empty() ? KeyValues{} : read_key_values(a.config);
  check_sections(kv);
  if (app.count("--size") || !kv.count("synth.size")) kv["synth.size"] = a.size;
  if (app.count("--defects") || !kv.count("synth.defects")) kv["synth.defects"] = a.defects;
  if (app.count("--seed") || !kv.count("synth.seed")) kv["synth.seed"] = std::to_string(a.seed);
  if (app.count("--n") || !kv.count("synth.n")) kv["synth.n"] = std::to_string(a.n);
  if (app.count("--test") || !kv.count("synth.test")) kv["synth.test"] = std::to_string(a.test);
  const SynthSpec spec = read_synth(kv, SynthSpec{});
  const std::size_t n = detail::parse_size("synth.n", kv["synth.n"]);
  const std::size_t test = detail::parse_size("synth.test", kv["synth.test"]);
  if (test > n) throw ConfigError("--test exceeds --n");

  const fs::path dir(a.out);
  prepare_out_dir(dir, a.force);
  std::string manifest = "# id\trgb\tdepth\tmask\tsplit\n";
  std::size_t defects = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const SynthSample s = synth_sample(spec, i);
    const std::string& id = s.sample.id;
    write_ppm(s.sample.rgb, dir / (id + "_rgb.ppm"));
    write_pgm(s.sample.depth, dir / (id + "_depth.pgm"));
    write_pgm(s.sample.mask, dir / (id + "_mask.pgm"));
    manifest += id + "\t" + id + "_rgb.ppm\t" + id + "_depth.pgm\t" + id + "_mask.pgm\t" +
                (i >= n - test ? "test" : "train") + "\n";
    defects += s.defects.size();
  }
  write_text(dir / "manifest.tsv", manifest);
  KeyValues resolved;
  write_config(spec, resolved);
  resolved["synth.n"] = std::to_string(n);
  resolved["synth.test"] = std::to_string(test);
  write_key_values(resolved, dir / "config.resolved");
  std::cout << "synth: " << n << " samples (" << n - test << " train, " << test << " test), " << defects
            << " defects, " << 3 * n << " images written to " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data, out, config, preset = "paper", sfe_stages, upsample;
  std::size_t epochs = 0, batch = 0, max_steps = 0, eval_every = 0, checkpoint_every = 0, lpm_width = 0;
  std::uint64_t seed = 0;
  double lr = 0, lr_min = 0;
  bool no_augment = false, no_cam = false, no_sfe = false, force = false;
};

int cmd_train(const TrainArgs& a, const CLI::App& app) {
  KeyValues kv = a.config.empty() ? KeyValues{} : read_key_values(a.config);
  check_sections(kv);
  auto flag = [&](const char* name) { return app.count(name) > 0; };
  if (flag("--data")) kv["data.manifest"] = a.data;
  if (flag("--preset") || !kv.count("model.preset")) kv["model.preset"] = a.preset;
  if (flag("--epochs")) kv["train.epochs"] = std::to_string(a.epochs);
  if (flag("--batch")) kv["train.batch_size"] = std::to_string(a.batch);
  if (flag("--seed")) kv["train.seed"] = std::to_string(a.seed);
  if (flag("--lr")) kv["train.lr_base"] = detail::format_real(a.lr);
  if (flag("--lr-min")) kv["train.lr_min"] = detail::format_real(a.lr_min);
  if (flag("--max-steps")) kv["train.max_steps"] = std::to_string(a.max_steps);
  if (flag("--eval-every")) kv["train.eval_every"] = std::to_string(a.eval_every);
  if (flag("--checkpoint-every")) kv["train.checkpoint_every"] = std::to_string(a.checkpoint_every);
  if (a.no_augment) kv["train.augment"] = "false";
  if (!kv.count("data.manifest")) throw ConfigError("train: --data is required");

  const std::string preset = kv["model.preset"];
  const TrainPlan plan = read_plan(kv, train_plan_for(preset));
  ModelConfig config = read_config(kv, preset_config(preset));
  Ablation ab;
  ab.no_cam = a.no_cam;
  ab.no_sfe = a.no_sfe;
  if (flag("--sfe-stages")) ab.sfe_stages = detail::parse_mask("--sfe-stages", a.sfe_stages);
  if (flag("--lpm-width")) ab.lpm_width = a.lpm_width;
  if (flag("--upsample")) ab.upsample = parse_upsample_mode(a.upsample);
  config = ablation_variant(config, ab);

  const fs::path manifest = fs::absolute(kv["data.manifest"]);
  const LoadedSplit data = load_split(manifest);
  if (data.train.empty()) throw DataError(manifest.string() + ": no training records");
  config = fit_input(config, data.train[0].height, data.train[0].width);

  const fs::path dir(a.out);
  prepare_out_dir(dir, a.force);
  KeyValues resolved;
  write_config(config, resolved);
  write_config(plan, resolved);
  resolved["data.manifest"] = manifest.string();
  resolved["data.normalization"] = kNormalization;
  write_key_values(resolved, dir / "config.resolved");

  std::cout << "train: " << data.train.size() << " train / " << data.test.size() << " test samples, preset "
            << config.preset << ", cam " << (config.use_cam ? "enabled" : "disabled") << "\n";
  LPCANet<float> model(config, plan.seed);
  const TrainResult r = train(model, data.train, data.test, plan, dir, [](const LogRow& row) {
    std::cout << "epoch " << row.epoch << " step " << row.step << " lr " << fmt("%.3g", row.lr) << " loss "
              << fmt("%.5f", row.loss);
    if (row.metrics) std::cout << " IoU " << fmt("%.4f", row.metrics->iou) << " MAE " << fmt("%.4f", row.metrics->mae);
    std::cout << "\n";
  });
  std::cout << "done: " << r.steps << " steps, final loss " << fmt("%.5f", r.step_losses.back()) << ", checkpoint "
            << (dir / "last.ckpt").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string data, checkpoint, out, config, split = "all";
  std::size_t batch = 4;
  bool force = false;
};

int cmd_eval(const EvalArgs& a) {
  std::optional<std::string> only;
  if (a.split != "all") only = a.split;
  const LoadedSplit data = load_split(a.data, only);
  std::vector<FloatSample> samples = data.train;
  samples.insert(samples.end(), data.test.begin(), data.test.end());
  if (samples.empty()) throw DataError(a.data + ": no records to evaluate");

  ModelConfig config = config_for_checkpoint(a.checkpoint, a.config);
  config = fit_input(config, samples[0].height, samples[0].width);
  LPCANet<float> model(config, 0);
  load_module(model, a.checkpoint);

  const fs::path dir(a.out);
  prepare_out_dir(dir, a.force);
  fs::create_directories(dir / "predictions");
  const auto preds = predict(model, samples, a.batch);
  MetricAccumulator acc;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Image img(samples[i].width, samples[i].height, 1);
    img.bytes = to_levels(preds[i]);
    write_pgm(img, dir / "predictions" / (samples[i].id + ".pgm"));
    acc.add(eval_pair(samples[i], preds[i]), samples[i].id);
  }
  const MetricReport rep = acc.report();
  std::ostringstream metrics, pr, roc;
  write_metrics_csv(metrics, acc.images(), rep);
  write_pr_csv(pr, rep.pr);
  write_roc_csv(roc, rep.roc);
  write_text(dir / "metrics.csv", metrics.str());
  write_text(dir / "pr.csv", pr.str());
  write_text(dir / "roc.csv", roc.str());
  KeyValues resolved;
  write_config(config, resolved);
  resolved["data.manifest"] = fs::absolute(a.data).string();
  resolved["data.normalization"] = kNormalization;
  resolved["run.checkpoint"] = fs::absolute(a.checkpoint).string();
  resolved["run.split"] = a.split;
  write_key_values(resolved, dir / "config.resolved");
  std::cout << "eval: " << samples.size() << " images  mAP " << fmt("%.4f", rep.map) << "  IoU " << fmt("%.4f", rep.iou)
            << "  MAE " << fmt("%.4f", rep.mae) << "  maxF " << fmt("%.4f", rep.max_f) << "  maxE "
            << fmt("%.4f", rep.max_e) << "  S " << fmt("%.4f", rep.s) << "\n";
  return 0;
}

// ---------------------------------------------------------------- infer

struct InferArgs {
  std::string rgb, depth, checkpoint, out, config;
};

int cmd_infer(const InferArgs& a) {
  Sample s;
  s.id = fs::path(a.rgb).stem().string();
  s.rgb = read_ppm(a.rgb);
  s.depth = read_pgm(a.depth);
  s.mask = Image(s.rgb.width, s.rgb.height, 1);
  validate(s);
  ModelConfig config = config_for_checkpoint(a.checkpoint, a.config);
  config = fit_input(config, s.height(), s.width());
  LPCANet<float> model(config, 0);
  load_module(model, a.checkpoint);
  const auto pred = predict(model, {to_float(s)}, 1);
  Image out(s.width(), s.height(), 1);
  out.bytes = to_levels(pred[0]);
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  write_pgm(out, a.out);
  std::cout << "infer: wrote " << s.width() << "x" << s.height() << " mask to " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  std::string preset = "tiny", ops = "all";
  double tolerance = 1e-6;
  std::size_t seeds = 5;
  bool inject_fault = false;
};

int cmd_gradcheck(const GradcheckArgs& a, const CLI::App& app) {
  const ModelConfig config = preset_config(a.preset);
  auto cases = diagnostics::all_cases(config);
  if (a.ops != "all") {
    std::vector<diagnostics::GradcheckCase> chosen;
    for (const auto& name : detail::split(a.ops, ',')) {
      auto it = std::find_if(cases.begin(), cases.end(), [&](const auto& c) { return c.name == name; });
      if (it == cases.end()) {
        std::string known;
        for (const auto& c : cases) known += " " + c.name;
        throw ConfigError("unknown op '" + name + "'; known:" + known);
      }
      chosen.push_back(*it);
    }
    cases = chosen;
  }
  // --tolerance sets the bar for single ops; module-level checks keep their
  // own looser bars unless the flag is given explicitly.
  const auto module_names = diagnostics::module_cases(config);
  auto is_module = [&](const std::string& n) {
    return std::any_of(module_names.begin(), module_names.end(), [&](const auto& m) { return m.name == n; });
  };
  std::printf("%-18s %6s %12s %10s %8s  %s\n", "op", "seeds", "max_rel_err", "tolerance", "skipped", "result");
  bool all_ok = true;
  for (const auto& c : cases) {
    const double tol = is_module(c.name) && !app.count("--tolerance") ? c.tolerance : a.tolerance;
    double worst = 0.0;
    std::size_t skipped = 0;
    bool ok = true;
    for (std::size_t s = 0; s < a.seeds; ++s) {
      const GradcheckResult r = c.run(s, a.inject_fault);
      worst = std::max(worst, r.max_rel_error);
      skipped += r.nonsmooth;
      ok = ok && r.ok(tol);
    }
    all_ok = all_ok && ok;
    std::printf("%-18s %6zu %12.3e %10.1e %8zu  %s\n", c.name.c_str(), a.seeds, worst, tol, skipped,
                ok ? "PASS" : "FAIL");
  }
  std::cout << (all_ok ? "gradcheck: all passed" : "gradcheck: FAILED") << (a.inject_fault ? " (fault injected)" : "")
            << "\n";
  return all_ok ? 0 : kExitNumeric;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string preset = "paper", input;
  std::size_t runs = 20, warmup = 3, batch = 1;
};

int cmd_bench(const BenchArgs& a) {
  ModelConfig config = preset_config(a.preset);
  if (!a.input.empty()) {
    const auto [h, w] = detail::parse_hw("--input", a.input);
    config.input_h = h;
    config.input_w = w;
    config.validate();
  }
  if (a.runs == 0) throw ConfigError("--runs must be positive");
  const Complexity cx = count_params_flops(config);
  LPCANet<float> model(config, 0);
  Rng rng(1);
  std::vector<float> rgb(a.batch * 3 * config.input_h * config.input_w), depth(a.batch * config.input_h * config.input_w);
  for (auto& v : rgb) v = static_cast<float>(rng.uniform());
  for (auto& v : depth) v = static_cast<float>(rng.uniform());
  const Tensor<float> trgb(Shape{a.batch, 3, config.input_h, config.input_w}, rgb);
  const Tensor<float> tdepth(Shape{a.batch, 1, config.input_h, config.input_w}, depth);

  NoGradScope<float> no_grad;
  const std::uint64_t before = mac_counter();
  model.forward(trgb, tdepth, Mode::kEval);
  const std::uint64_t measured = (mac_counter() - before) / a.batch;
  for (std::size_t i = 1; i < a.warmup; ++i) model.forward(trgb, tdepth, Mode::kEval);
  std::vector<double> ms;
  for (std::size_t i = 0; i < a.runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    model.forward(trgb, tdepth, Mode::kEval);
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(ms.begin(), ms.end());
  const double median = ms.size() % 2 ? ms[ms.size() / 2] : 0.5 * (ms[ms.size() / 2 - 1] + ms[ms.size() / 2]);

  const double params_m = static_cast<double>(cx.params) / 1e6, macs_g = static_cast<double>(cx.macs) / 1e9;
  std::cout << "bench: preset " << config.preset << ", input " << config.input_h << "x" << config.input_w << ", batch "
            << a.batch << "\n";
  std::cout << "params      " << cx.params << " (" << fmt("%.2f", params_m) << " M)\n";
  std::cout << "mult-adds   " << cx.macs << " (" << fmt("%.2f", macs_g) << " G), measured " << measured << "\n";
  for (const auto& e : cx.breakdown) {
    std::printf("  %-12s %12llu params %14llu mult-adds\n", e.component.c_str(),
                static_cast<unsigned long long>(e.params), static_cast<unsigned long long>(e.macs));
  }
  std::cout << "latency     median " << fmt("%.2f", median) << " ms over " << a.runs << " runs after " << a.warmup
            << " warmups (" << fmt("%.2f", 1000.0 * static_cast<double>(a.batch) / median) << " fps, "
            << thread_cap() << " thread cap)\n";
  std::cout << "reference   " << kPaperParamsM << " M params, " << kPaperFlopsG << " G FLOPs, " << kPaperFps
            << " fps on a GPU; deltas " << fmt("%+.2f", params_m - kPaperParamsM) << " M, "
            << fmt("%+.2f", macs_g - kPaperFlopsG)
            << " G. The decoder and fusion layout are reconstructions, and the reference FLOP\n"
               "            convention is unstated, so the deltas are informational only.\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LPCANet RGB-D rail-defect segmentation toolkit"};
  app.require_subcommand(1);

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic RGB-D rail-defect dataset");
  synth->add_option("--out", sy.out, "Output directory")->required();
  synth->add_option("--n", sy.n, "Number of samples")->capture_default_str();
  sy.size = "64x64";
  synth->add_option("--size", sy.size, "Image size HxW")->capture_default_str();
  synth->add_option("--seed", sy.seed, "Generator seed")->capture_default_str();
  sy.defects = "1-3";
  synth->add_option("--defects", sy.defects, "Defects per image, N or MIN-MAX")->capture_default_str();
  synth->add_option("--test", sy.test, "Trailing samples tagged as the test split")->capture_default_str();
  synth->add_option("--config", sy.config, "key=value config file (flags override it)");
  synth->add_flag("--force", sy.force, "Write into a non-empty output directory");

  TrainArgs tr;
  auto* trainc = app.add_subcommand("train", "Train a model on a manifest");
  trainc->add_option("--data", tr.data, "Manifest (tab-separated id rgb depth mask [split])");
  trainc->add_option("--out", tr.out, "Output directory")->required();
  trainc->add_option("--preset", tr.preset, "Width preset")->check(CLI::IsMember({"paper", "tiny"}));
  trainc->add_option("--epochs", tr.epochs, "Epochs");
  trainc->add_option("--batch", tr.batch, "Batch size");
  trainc->add_option("--seed", tr.seed, "Seed for initialization, shuffling and augmentation");
  trainc->add_option("--lr", tr.lr, "Base learning rate");
  trainc->add_option("--lr-min", tr.lr_min, "Final learning rate of the cosine schedule");
  trainc->add_option("--max-steps", tr.max_steps, "Stop after this many optimizer steps");
  trainc->add_option("--eval-every", tr.eval_every, "Evaluate the test split every N epochs");
  trainc->add_option("--checkpoint-every", tr.checkpoint_every, "Keep epoch_NNN.ckpt every N epochs");
  trainc->add_flag("--no-augment", tr.no_augment, "Disable data augmentation");
  trainc->add_flag("--no-cam", tr.no_cam, "Replace cross-attention with concat + 1x1 conv fusion");
  trainc->add_flag("--no-sfe", tr.no_sfe, "Disable the spatial feature extractor at every stage");
  trainc->add_option("--sfe-stages", tr.sfe_stages, "SFE stage mask, e.g. 1110");
  trainc->add_option("--lpm-width", tr.lpm_width, "Depth pyramid width of stage 1 (later stages double)");
  trainc->add_option("--upsample", tr.upsample, "Decoder upsampling mode")
      ->check(CLI::IsMember({"pixel_shuffle", "nearest", "bilinear", "transposed_conv", "patch_expand", "staged_ps"}));
  trainc->add_option("--config", tr.config, "key=value config file (flags override it)");
  trainc->add_flag("--force", tr.force, "Write into a non-empty output directory");

  EvalArgs ev;
  auto* evalc = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest");
  evalc->add_option("--data", ev.data, "Manifest")->required();
  evalc->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  evalc->add_option("--out", ev.out, "Output directory")->required();
  evalc->add_option("--config", ev.config, "Model config (default: config.resolved beside the checkpoint)");
  evalc->add_option("--split", ev.split, "Records to evaluate")->check(CLI::IsMember({"all", "train", "test"}));
  evalc->add_option("--batch", ev.batch, "Inference batch size")->check(CLI::PositiveNumber);
  evalc->add_flag("--force", ev.force, "Write into a non-empty output directory");

  InferArgs in;
  auto* infer = app.add_subcommand("infer", "Predict one mask");
  infer->add_option("--rgb", in.rgb, "RGB image (PPM)")->required();
  infer->add_option("--depth", in.depth, "Depth image (PGM)")->required();
  infer->add_option("--checkpoint", in.checkpoint, "Checkpoint file")->required();
  infer->add_option("--out", in.out, "Output mask (PGM)")->required();
  infer->add_option("--config", in.config, "Model config (default: config.resolved beside the checkpoint)");

  GradcheckArgs gc;
  auto* grad = app.add_subcommand("gradcheck", "Check analytic gradients against central differences");
  grad->add_option("--preset", gc.preset, "Preset for the end-to-end model check")
      ->check(CLI::IsMember({"paper", "tiny"}));
  grad->add_option("--ops", gc.ops, "Comma-separated op names or 'all'")->capture_default_str();
  grad->add_option("--tolerance", gc.tolerance, "Max relative error for single ops")->capture_default_str();
  grad->add_option("--seeds", gc.seeds, "Random instances per op")->capture_default_str()->check(CLI::PositiveNumber);
  grad->add_flag("--inject-fault", gc.inject_fault, "Corrupt every backward pass by 1% (must fail)");

  BenchArgs be;
  auto* bench = app.add_subcommand("bench", "Report parameters, mult-adds and latency");
  bench->add_option("--preset", be.preset, "Width preset")->check(CLI::IsMember({"paper", "tiny"}));
  bench->add_option("--input", be.input, "Input size HxW (default: the preset's)");
  bench->add_option("--runs", be.runs, "Timed forward passes")->capture_default_str();
  bench->add_option("--warmup", be.warmup, "Untimed forward passes first")->capture_default_str();
  bench->add_option("--batch", be.batch, "Batch size")->capture_default_str()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    Eigen::setNbThreads(static_cast<int>(thread_cap()));
    if (*synth) return cmd_synth(sy, *synth);
    if (*trainc) return cmd_train(tr, *trainc);
    if (*evalc) return cmd_eval(ev);
    if (*infer) return cmd_infer(in);
    if (*grad) return cmd_gradcheck(gc, *grad);
    if (*bench) return cmd_bench(be);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
