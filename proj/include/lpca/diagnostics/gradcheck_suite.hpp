#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lpca/core/gradcheck.hpp"
#include "lpca/core/ops.hpp"
#include "lpca/layers/batchnorm.hpp"
#include "lpca/layers/conv.hpp"
#include "lpca/layers/linear.hpp"
#include "lpca/layers/resample.hpp"
#include "lpca/model/cam.hpp"
#include "lpca/model/lpcanet.hpp"
#include "lpca/model/sfe.hpp"
#include "lpca/train/loss.hpp"

namespace lpca::diagnostics {

/// One gradient check: `run(seed, fault)` builds random f64 inputs, and with
/// `fault` set routes the output through an identity whose backward is off
/// by 1%, so a working checker must flag it.
struct GradcheckCase {
  std::string name;
  double tolerance;  // default pass threshold for max relative error
  std::function<GradcheckResult(std::uint64_t seed, bool fault)> run;
};

inline Tensor<double> uniform_tensor(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  std::vector<double> v(s.numel());
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor<double>(s, std::move(v));
}

// Entries at least `margin` away from zero, so ReLU-like kinks are not crossed.
inline Tensor<double> off_zero_tensor(Shape s, std::uint64_t seed, double margin = 1e-3) {
  Rng rng(seed);
  std::vector<double> v(s.numel());
  for (auto& x : v) {
    do x = rng.uniform(-1.0, 1.0);
    while (std::fabs(x) < margin);
  }
  return Tensor<double>(s, std::move(v));
}

/// Identity forward; backward scales the incoming gradient by 1.01.
inline Tensor<double> faulty_identity(const Tensor<double>& x) {
  Tensor<double> out(x.shape(), std::vector<double>(x.data().begin(), x.data().end()));
  if (detail::recording<double>({&x})) {
    auto px = x.impl(), po = out.impl();
    detail::record<double>("faulty_identity", {px}, out, [px, po] {
      auto& g = px->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += 1.01 * po->grad[i];
    });
  }
  return out;
}

/// Fixed random projection to a scalar, so every output element matters.
inline Tensor<double> probe(const Tensor<double>& y, bool fault, std::uint64_t seed = 99) {
  return sum_all(mul(fault ? faulty_identity(y) : y, uniform_tensor(y.shape(), seed)));
}

template <class M>
void randomize_parameters(M& m, std::uint64_t seed, double scale) {
  Rng rng(seed);
  for (const auto& p : m.parameters()) {
    Tensor<double> t = p.tensor;
    for (auto& v : t.mutable_data()) v = rng.uniform(-scale, scale);
  }
}

// Moves biases, BN affine terms and running stats off their constant initial
// values so no unit sits exactly on an activation kink.
template <class M>
void randomize_non_weights(M& m, std::uint64_t seed) {
  Rng rng(seed);
  for (const auto& p : m.state()) {
    if (p.init.kind == InitRule::Kind::kKaimingUniform) continue;
    Tensor<double> t = p.tensor;
    for (auto& v : t.mutable_data())
      v = p.init.kind == InitRule::Kind::kOnes ? rng.uniform(0.5, 1.5) : rng.uniform(-0.2, 0.2);
  }
}

// Softmax cancels the key bias (it adds q·b to a whole row), so its exact
// gradient is zero and relative error against roundoff is meaningless.
inline bool is_key_bias(const std::string& name) {
  return name.size() >= 8 && name.compare(name.size() - 8, 8, "key.bias") == 0;
}

template <class M>
std::vector<Tensor<double>> with_parameters(const M& m, std::vector<Tensor<double>> inputs) {
  for (const auto& p : m.parameters())
    if (!is_key_bias(p.name)) inputs.push_back(p.tensor);
  return inputs;
}

inline std::vector<GradcheckCase> op_cases() {
  using R = GradcheckResult;
  // Convolution-like layers are bilinear in (input, weight), so central
  // differences are exact for any step; a larger step cuts roundoff.
  const GradcheckOptions bilinear{1e-3, 0, 0, 0.0};
  std::vector<GradcheckCase> c;
  auto unary = [&](std::string name, Shape s, bool off_zero, std::function<Tensor<double>(const Tensor<double>&)> f) {
    c.push_back({name, 1e-6, [=](std::uint64_t seed, bool fault) -> R {
                   const auto x = off_zero ? off_zero_tensor(s, seed) : uniform_tensor(s, seed);
                   return gradcheck([&] { return probe(f(x), fault); }, {x});
                 }});
  };
  c.push_back({"add", 1e-6, [](std::uint64_t seed, bool fault) -> R {
                 const auto a = uniform_tensor(Shape{2, 3, 2, 2}, seed), b = uniform_tensor(Shape{1, 3, 1, 1}, seed + 1);
                 return gradcheck([&] { return probe(add(add(a, a), b), fault); }, {a, b});
               }});
  c.push_back({"mul", 1e-6, [](std::uint64_t seed, bool fault) -> R {
                 const auto a = uniform_tensor(Shape{2, 2, 2, 3}, seed), b = uniform_tensor(Shape{2, 2, 2, 3}, seed + 1);
                 return gradcheck([&] { return probe(mul(a, b), fault); }, {a, b});
               }});
  unary("scale", Shape{1, 2, 3, 3}, false, [](const Tensor<double>& x) { return scale(x, -1.7); });
  unary("sum_all", Shape{2, 2, 2, 2}, false, [](const Tensor<double>& x) { return sum_all(x); });
  unary("mean_all", Shape{2, 2, 2, 2}, false, [](const Tensor<double>& x) { return mean_all(x); });
  unary("relu", Shape{2, 3, 3, 3}, true, [](const Tensor<double>& x) { return relu(x); });
  unary("relu6", Shape{2, 3, 3, 3}, true, [](const Tensor<double>& x) { return relu6(scale(x, 7.0)); });
  unary("sigmoid", Shape{2, 3, 3, 3}, false, [](const Tensor<double>& x) { return sigmoid(scale(x, 3.0)); });
  unary("softmax_last", Shape{2, 2, 3, 5}, false, [](const Tensor<double>& x) { return softmax_last(scale(x, 2.0)); });
  unary("reshape_permute", Shape{2, 3, 2, 4}, false, [](const Tensor<double>& x) {
    return reshape(permute(x, {0, 2, 3, 1}), Shape{1, 2, 8, 3});
  });
  unary("transpose_last", Shape{2, 1, 3, 4}, false, [](const Tensor<double>& x) { return transpose_last(x); });
  c.push_back({"concat_channels", 1e-6, [](std::uint64_t seed, bool fault) -> R {
                 const auto a = uniform_tensor(Shape{2, 2, 3, 3}, seed), b = uniform_tensor(Shape{2, 3, 3, 3}, seed + 1);
                 return gradcheck([&] { return probe(concat_channels(a, b), fault); }, {a, b});
               }});
  c.push_back({"matmul", 1e-6, [=](std::uint64_t seed, bool fault) -> R {
                 const auto a = uniform_tensor(Shape{2, 1, 3, 4}, seed), b = uniform_tensor(Shape{2, 1, 4, 2}, seed + 1);
                 return gradcheck([&] { return probe(matmul_batched(a, b), fault); }, {a, b}, bilinear);
               }});
  auto conv = [&](std::string name, Conv2dOptions o, Shape in) {
    c.push_back({name, 1e-6, [=](std::uint64_t seed, bool fault) -> R {
                   Conv2d<double> layer(o);
                   randomize_parameters(layer, seed, 0.5);
                   const auto x = uniform_tensor(in, seed + 10);
                   return gradcheck([&] { return probe(layer.forward(x), fault); }, with_parameters(layer, {x}),
                                    bilinear);
                 }});
  };
  conv("conv2d", Conv2dOptions{3, 4, {3, 3}, 1, {}, 1, true}, Shape{2, 3, 5, 5});
  conv("conv2d_strided", Conv2dOptions{3, 5, {4, 4}, 2, {}, 1, true}, Shape{2, 3, 8, 8});
  conv("conv2d_depthwise", Conv2dOptions{4, 4, {3, 3}, 2, {}, 4, false}, Shape{2, 4, 6, 6});
  c.push_back({"linear", 1e-6, [=](std::uint64_t seed, bool fault) -> R {
                 Linear<double> layer(5, 3);
                 randomize_parameters(layer, seed, 0.5);
                 const auto x = uniform_tensor(Shape{2, 1, 4, 5}, seed + 30);
                 return gradcheck([&] { return probe(layer.forward(x), fault); }, with_parameters(layer, {x}),
                                  bilinear);
               }});
  for (const Mode mode : {Mode::kTrain, Mode::kEval}) {
    c.push_back({mode == Mode::kTrain ? "batch_norm_train" : "batch_norm_eval", 1e-6,
                 [mode](std::uint64_t seed, bool fault) -> R {
                   BatchNorm2d<double> bn(3);
                   randomize_parameters(bn, seed, 0.5);
                   randomize_non_weights(bn, seed + 1);
                   const auto x = uniform_tensor(Shape{2, 3, 3, 3}, seed + 20);
                   return gradcheck([&] { return probe(bn.forward(x, mode), fault); }, with_parameters(bn, {x}));
                 }});
  }
  for (const PoolKind kind : {PoolKind::kMax, PoolKind::kAvg}) {
    unary(kind == PoolKind::kMax ? "max_pool" : "avg_pool", Shape{2, 3, 6, 4}, false,
          [kind](const Tensor<double>& x) { return pool_forward(PoolOptions{kind, {2, 2}, 2}, x); });
  }
  unary("pixel_shuffle", Shape{1, 8, 2, 3}, false, [](const Tensor<double>& x) { return pixel_shuffle(x, 2); });
  unary("upsample_nearest", Shape{2, 2, 2, 3}, false,
        [](const Tensor<double>& x) { return upsample_fixed(x, UpsampleMode::kNearest, 3); });
  unary("upsample_bilinear", Shape{2, 2, 2, 3}, false,
        [](const Tensor<double>& x) { return upsample_fixed(x, UpsampleMode::kBilinear, 3); });
  for (const UpsampleMode mode : {UpsampleMode::kTransposedConv, UpsampleMode::kPatchExpand}) {
    c.push_back({std::string(to_string(mode)), 1e-6, [=](std::uint64_t seed, bool fault) -> R {
                   Upsampler<double> up(mode, 3, 2, 2);
                   randomize_parameters(up, seed + 1, 0.5);
                   const auto x = uniform_tensor(Shape{2, 3, 2, 3}, seed);
                   return gradcheck([&] { return probe(up.forward(x), fault); }, with_parameters(up, {x}), bilinear);
                 }});
  }
  c.push_back({"bce_loss", 1e-6, [](std::uint64_t seed, bool fault) -> R {
                 const auto pred = uniform_tensor(Shape{1, 1, 3, 3}, seed, 0.05, 0.95);
                 Rng rng(seed + 1);
                 std::vector<double> t(9);
                 for (auto& v : t) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
                 const Tensor<double> target(pred.shape(), t);
                 return gradcheck([&] { return bce_loss(fault ? faulty_identity(pred) : pred, target); }, {pred});
               }});
  return c;
}

/// Module-level checks: attention, the spatial feature extractor and the
/// whole network. The last samples 200 parameter coordinates and skips the
/// few whose ±eps window straddles a ReLU or max-pool kink.
inline std::vector<GradcheckCase> module_cases(const ModelConfig& model_config) {
  using R = GradcheckResult;
  std::vector<GradcheckCase> c;
  c.push_back({"cam", 1e-6, [](std::uint64_t seed, bool fault) -> R {
                 CrossAttention<double> cam(3, 4, 4, 2);
                 randomize_parameters(cam, seed + 3, 1.0);
                 const auto fr = uniform_tensor(Shape{2, 3, 2, 3}, seed + 1);
                 const auto fd = uniform_tensor(Shape{2, 4, 2, 3}, seed + 2);
                 return gradcheck([&] { return probe(cam.forward(fr, fd), fault); }, with_parameters(cam, {fr, fd}));
               }});
  c.push_back({"sfe", 1e-5, [](std::uint64_t seed, bool fault) -> R {
                 SpatialFeatureExtractor<double> sfe(3, {});
                 randomize_parameters(sfe, seed, 1.0);
                 randomize_non_weights(sfe, seed + 3);
                 const auto x = off_zero_tensor(Shape{2, 3, 3, 4}, seed + 7);
                 return gradcheck([&] { return probe(sfe.forward(x, Mode::kEval), fault); }, with_parameters(sfe, {x}));
               }});
  c.push_back({"lpcanet", 1e-4, [model_config](std::uint64_t seed, bool fault) -> R {
                 LPCANet<double> model(model_config, seed + 7);
                 randomize_non_weights(model, seed + 11);
                 const Shape s{1, 1, model_config.input_h, model_config.input_w};
                 // Raw random running stats let activations grow until the
                 // sigmoid saturates and most gradients sink below what a
                 // finite difference can resolve. Settle them on real batches.
                 {
                   NoGradScope<double> no_grad;
                   const auto rgb2 = uniform_tensor(Shape{2, 3, s.h, s.w}, seed + 4, 0.0, 1.0);
                   const auto depth2 = uniform_tensor(Shape{2, 1, s.h, s.w}, seed + 5, 0.0, 1.0);
                   for (int k = 0; k < 40; ++k) model.forward(rgb2, depth2, Mode::kTrain);
                 }
                 const auto rgb = uniform_tensor(Shape{1, 3, s.h, s.w}, seed + 4, 0.0, 1.0);
                 const auto depth = uniform_tensor(s, seed + 5, 0.0, 1.0);
                 GradcheckOptions opts;
                 opts.max_coordinates = 200;
                 opts.seed = seed + 3;
                 opts.kink_tolerance = 1e-5;
                 return gradcheck([&] { return probe(model.forward(rgb, depth, Mode::kEval), fault); },
                                  with_parameters(model, {}), opts);
               }});
  return c;
}

inline std::vector<GradcheckCase> all_cases(const ModelConfig& model_config) {
  auto c = op_cases();
  for (auto& m : module_cases(model_config)) c.push_back(std::move(m));
  return c;
}

}  // namespace lpca::diagnostics
