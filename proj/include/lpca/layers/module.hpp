#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lpca/core/rng.hpp"
#include "lpca/core/tensor.hpp"

namespace lpca {

enum class Mode { kTrain, kEval };

/// How init_parameters() fills a registered tensor.
struct InitRule {
  enum class Kind { kKaimingUniform, kZeros, kOnes };
  Kind kind = Kind::kZeros;
  std::size_t fan_in = 0;

  static InitRule kaiming(std::size_t fan_in) { return {Kind::kKaimingUniform, fan_in}; }
  static InitRule zeros() { return {Kind::kZeros, 0}; }
  static InitRule ones() { return {Kind::kOnes, 0}; }
};

template <class T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
  InitRule init{};
};

/// Holds named handles to trainable parameters and persistent buffers.
/// Composites copy their children's handles under a dotted prefix, so a
/// module can be moved freely without invalidating the registry.
template <class T>
class Module {
 public:
  virtual ~Module() = default;

  const std::vector<NamedTensor<T>>& parameters() const { return params_; }
  const std::vector<NamedTensor<T>>& buffers() const { return buffers_; }

  // Parameters followed by buffers: everything a checkpoint must hold.
  std::vector<NamedTensor<T>> state() const {
    std::vector<NamedTensor<T>> all = params_;
    all.insert(all.end(), buffers_.begin(), buffers_.end());
    return all;
  }

  std::size_t parameter_count() const {
    std::size_t total = 0;
    for (const auto& p : params_) total += p.tensor.numel();
    return total;
  }

  void zero_grad() {
    for (auto& p : params_) {
      if (p.tensor.has_grad()) p.tensor.zero_grad();
    }
  }

 protected:
  Module() = default;
  Module(const Module&) = default;
  Module& operator=(const Module&) = default;
  Module(Module&&) noexcept = default;
  Module& operator=(Module&&) noexcept = default;

  Tensor<T> register_parameter(std::string name, Tensor<T> t, InitRule init) {
    t.set_requires_grad(true);
    params_.push_back({std::move(name), t, init});
    return t;
  }

  Tensor<T> register_buffer(std::string name, Tensor<T> t, InitRule init) {
    buffers_.push_back({std::move(name), t, init});
    return t;
  }

  void register_module(const std::string& name, const Module& child) {
    for (const auto& p : child.params_) params_.push_back({name + "." + p.name, p.tensor, p.init});
    for (const auto& b : child.buffers_) buffers_.push_back({name + "." + b.name, b.tensor, b.init});
  }

 private:
  std::vector<NamedTensor<T>> params_;
  std::vector<NamedTensor<T>> buffers_;
};

/// Fills every registered tensor of `m` in registration order from one seeded
/// stream: Kaiming-uniform weights with bound sqrt(6 / fan_in), zero biases,
/// unit BN scales and running variances.
template <class T>
void init_parameters(Module<T>& m, std::uint64_t seed) {
  Rng rng(seed);
  for (auto* list : {&m.parameters(), &m.buffers()}) {
    for (const auto& entry : *list) {
      Tensor<T> t = entry.tensor;
      auto values = t.mutable_data();
      switch (entry.init.kind) {
        case InitRule::Kind::kKaimingUniform: {
          const double bound = std::sqrt(6.0 / static_cast<double>(entry.init.fan_in));
          for (auto& v : values) v = static_cast<T>(rng.uniform(-bound, bound));
          break;
        }
        case InitRule::Kind::kZeros:
          std::fill(values.begin(), values.end(), T(0));
          break;
        case InitRule::Kind::kOnes:
          std::fill(values.begin(), values.end(), T(1));
          break;
      }
    }
  }
}

}  // namespace lpca
