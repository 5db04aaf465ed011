#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "lpca/core/ops.hpp"
#include "lpca/layers/linear.hpp"

namespace lpca {

namespace tokens {

/// (N, C, h, w) feature map -> (N, 1, h·w, C) token matrix.
template <class T>
Tensor<T> from_map(const Tensor<T>& x) {
  const Shape& s = x.shape();
  return reshape(permute(x, {0, 2, 3, 1}), Shape{s.n, 1, s.h * s.w, s.c});
}

/// (N, 1, h·w, C) -> (N, C, h, w).
template <class T>
Tensor<T> to_map(const Tensor<T>& t, std::size_t h, std::size_t w) {
  const Shape& s = t.shape();
  return permute(reshape(t, Shape{s.n, h, w, s.w}), {0, 3, 1, 2});
}

/// (N, 1, L, heads·d) -> (N, heads, L, d).
template <class T>
Tensor<T> split_heads(const Tensor<T>& t, std::size_t heads) {
  const Shape& s = t.shape();
  return permute(reshape(t, Shape{s.n, s.h, heads, s.w / heads}), {0, 2, 1, 3});
}

/// (N, heads, L, d) -> (N, 1, L, heads·d).
template <class T>
Tensor<T> merge_heads(const Tensor<T>& t) {
  const Shape& s = t.shape();
  return reshape(permute(t, {0, 2, 1, 3}), Shape{s.n, 1, s.h, s.c * s.w});
}

}  // namespace tokens

/// Multi-head cross-attention: queries from RGB features, keys and values from
/// depth features, softmax(Q̂·K̂ᵀ / √d_z)·V̂ per head, then an output projection.
template <class T>
class CrossAttention : public Module<T> {
 public:
  CrossAttention() = default;
  CrossAttention(std::size_t rgb_channels, std::size_t depth_channels, std::size_t channels, std::size_t heads)
      : channels_(channels), heads_(heads) {
    if (heads == 0 || channels % heads != 0) {
      throw ConfigError("CrossAttention: C^c = " + std::to_string(channels) + " is not N_h * d_z for N_h = " +
                        std::to_string(heads));
    }
    query_ = Linear<T>(rgb_channels, channels);
    key_ = Linear<T>(depth_channels, channels);
    value_ = Linear<T>(depth_channels, channels);
    output_ = Linear<T>(channels, channels);
    this->register_module("query", query_);
    this->register_module("key", key_);
    this->register_module("value", value_);
    this->register_module("output", output_);
  }

  struct Parts {
    Tensor<T> q, k, v;    // (N, heads, L, d_z)
    Tensor<T> attended;   // merged heads before the output projection, (N, 1, L, C)
  };

  /// Everything up to (not including) the output projection.
  Parts attend(const Tensor<T>& rgb, const Tensor<T>& depth) const {
    check(rgb, depth);
    Parts p;
    p.q = tokens::split_heads(query_.forward(tokens::from_map(rgb)), heads_);
    p.k = tokens::split_heads(key_.forward(tokens::from_map(depth)), heads_);
    p.v = tokens::split_heads(value_.forward(tokens::from_map(depth)), heads_);
    p.attended = tokens::merge_heads(attention(p.q, p.k, p.v, inv_sqrt_dz()));
    return p;
  }

  /// Attention weights (N, heads, L, L); every row is a probability vector.
  Tensor<T> weights(const Tensor<T>& rgb, const Tensor<T>& depth) const {
    const Parts p = attend(rgb, depth);
    return attention_weights(p.q, p.k, inv_sqrt_dz());
  }

  Tensor<T> forward(const Tensor<T>& rgb, const Tensor<T>& depth) const {
    const Parts p = attend(rgb, depth);
    return tokens::to_map(output_.forward(p.attended), rgb.shape().h, rgb.shape().w);
  }

  std::size_t heads() const { return heads_; }
  std::size_t head_dim() const { return channels_ / heads_; }
  Linear<T>& query() { return query_; }
  Linear<T>& key() { return key_; }
  Linear<T>& value() { return value_; }
  Linear<T>& output() { return output_; }

 private:
  T inv_sqrt_dz() const { return T(1) / std::sqrt(static_cast<T>(head_dim())); }

  static void check(const Tensor<T>& rgb, const Tensor<T>& depth) {
    const Shape& a = rgb.shape();
    const Shape& b = depth.shape();
    if (a.n != b.n || a.h != b.h || a.w != b.w) {
      throw ShapeError("CrossAttention: RGB " + to_string(a) + " and depth " + to_string(b) +
                       " differ in batch or spatial size");
    }
  }

  std::size_t channels_ = 0, heads_ = 1;
  Linear<T> query_, key_, value_, output_;
};

}  // namespace lpca
