#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "lpca/core/error.hpp"
#include "lpca/core/gemm.hpp"
#include "lpca/core/tensor.hpp"

namespace lpca {

namespace detail {

template <class T>
bool recording(std::initializer_list<const Tensor<T>*> inputs) {
  if (active_tape<T>() == nullptr) return false;
  for (const Tensor<T>* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

template <class T>
void record(const char* op, std::vector<std::shared_ptr<TensorImpl<T>>> inputs, Tensor<T>& out,
            std::function<void()> backward) {
  out.impl()->requires_grad = true;
  out.impl()->is_leaf = false;
  active_tape<T>()->record({op, std::move(inputs), out.impl(), std::move(backward)});
}

inline std::size_t conv_out_size(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad,
                                 const char* what) {
  const auto padded = static_cast<long long>(in + 2 * pad);
  if (stride == 0 || padded < static_cast<long long>(k)) {
    throw ShapeError(std::string(what) + ": non-positive output size (in=" + std::to_string(in) +
                     ", k=" + std::to_string(k) + ", pad=" + std::to_string(pad) + ")");
  }
  return (in + 2 * pad - k) / stride + 1;
}

// Unfolds one image (channels × H × W) into a (channels·kh·kw) × (ho·wo) matrix.
template <class T>
void im2col(const T* x, std::size_t channels, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, std::size_t sh, std::size_t sw, std::size_t ph, std::size_t pw,
            std::size_t ho, std::size_t wo, T* col) {
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        T* row = col + ((c * kh + ki) * kw + kj) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const long long iy = static_cast<long long>(oy * sh + ki) - static_cast<long long>(ph);
          T* dst = row + oy * wo;
          if (iy < 0 || iy >= static_cast<long long>(h)) {
            std::fill(dst, dst + wo, T(0));
            continue;
          }
          const T* src = x + (c * h + static_cast<std::size_t>(iy)) * w;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const long long ix = static_cast<long long>(ox * sw + kj) - static_cast<long long>(pw);
            dst[ox] = (ix < 0 || ix >= static_cast<long long>(w)) ? T(0)
                                                                   : src[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-and-adds columns back into the image.
template <class T>
void col2im(const T* col, std::size_t channels, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, std::size_t sh, std::size_t sw, std::size_t ph, std::size_t pw,
            std::size_t ho, std::size_t wo, T* x) {
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        const T* row = col + ((c * kh + ki) * kw + kj) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const long long iy = static_cast<long long>(oy * sh + ki) - static_cast<long long>(ph);
          if (iy < 0 || iy >= static_cast<long long>(h)) continue;
          T* dst = x + (c * h + static_cast<std::size_t>(iy)) * w;
          const T* src = row + oy * wo;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const long long ix = static_cast<long long>(ox * sw + kj) - static_cast<long long>(pw);
            if (ix >= 0 && ix < static_cast<long long>(w)) dst[static_cast<std::size_t>(ix)] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and reductions

/// Elementwise sum. `b` may also be a per-channel bias of shape (1, C, 1, 1).
template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const bool same = sa == sb;
  const bool bias = sb == Shape{1, sa.c, 1, 1};
  if (!same && !bias) {
    throw ShapeError("add: shape mismatch " + to_string(sa) + " vs " + to_string(sb));
  }
  Tensor<T> out(sa);
  auto y = out.mutable_data();
  auto x = a.data();
  auto z = b.data();
  if (same) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] + z[i];
  } else {
    const std::size_t hw = sa.spatial();
    for (std::size_t n = 0; n < sa.n; ++n)
      for (std::size_t c = 0; c < sa.c; ++c) {
        const std::size_t base = (n * sa.c + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) y[base + i] = x[base + i] + z[c];
      }
  }
  if (detail::recording<T>({&a, &b})) {
    auto pa = a.impl(), pb = b.impl(), po = out.impl();
    detail::record<T>("add", {pa, pb}, out, [pa, pb, po, same] {
      const auto& g = po->grad;
      if (pa->requires_grad) {
        auto& ga = pa->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (pb->requires_grad) {
        auto& gb = pb->grad_buffer();
        if (same) {
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        } else {
          const Shape& s = po->shape;
          const std::size_t hw = s.spatial();
          for (std::size_t n = 0; n < s.n; ++n)
            for (std::size_t c = 0; c < s.c; ++c) {
              const std::size_t base = (n * s.c + c) * hw;
              T acc = 0;
              for (std::size_t i = 0; i < hw; ++i) acc += g[base + i];
              gb[c] += acc;
            }
        }
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mul: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  Tensor<T> out(a.shape());
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.at(i) * b.at(i);
  if (detail::recording<T>({&a, &b})) {
    auto pa = a.impl(), pb = b.impl(), po = out.impl();
    detail::record<T>("mul", {pa, pb}, out, [pa, pb, po] {
      const auto& g = po->grad;
      if (pa->requires_grad) {
        auto& ga = pa->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * pb->data[i];
      }
      if (pb->requires_grad) {
        auto& gb = pb->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * pa->data[i];
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> scale(const Tensor<T>& x, T s) {
  Tensor<T> out(x.shape());
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x.at(i) * s;
  if (detail::recording<T>({&x})) {
    auto px = x.impl(), po = out.impl();
    detail::record<T>("scale", {px}, out, [px, po, s] {
      auto& gx = px->grad_buffer();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += po->grad[i] * s;
    });
  }
  return out;
}

namespace detail {
// Shared body for pointwise activations: value(x) and slope(x, y).
template <class T, class Value, class Slope>
Tensor<T> pointwise(const char* name, const Tensor<T>& x, Value value, Slope slope) {
  Tensor<T> out(x.shape());
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = value(x.at(i));
  if (recording<T>({&x})) {
    auto px = x.impl(), po = out.impl();
    record<T>(name, {px}, out, [px, po, slope] {
      auto& gx = px->grad_buffer();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += po->grad[i] * slope(px->data[i], po->data[i]);
    });
  }
  return out;
}
}  // namespace detail

/// max(x, 0); the subgradient at exactly 0 is 0.
template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  return detail::pointwise<T>(
      "relu", x, [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

/// min(max(x, 0), 6); subgradient 0 at both kinks.
template <class T>
Tensor<T> relu6(const Tensor<T>& x) {
  return detail::pointwise<T>(
      "relu6", x, [](T v) { return std::clamp(v, T(0), T(6)); },
      [](T v, T) { return (v > T(0) && v < T(6)) ? T(1) : T(0); });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return detail::pointwise<T>(
      "sigmoid", x,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Tensor<T> sum_all(const Tensor<T>& x) {
  double acc = 0;
  for (T v : x.data()) acc += static_cast<double>(v);
  Tensor<T> out(Shape{}, static_cast<T>(acc));
  if (detail::recording<T>({&x})) {
    auto px = x.impl(), po = out.impl();
    detail::record<T>("sum_all", {px}, out, [px, po] {
      auto& gx = px->grad_buffer();
      const T g = po->grad[0];
      for (auto& v : gx) v += g;
    });
  }
  return out;
}

template <class T>
Tensor<T> mean_all(const Tensor<T>& x) {
  return scale(sum_all(x), T(1) / static_cast<T>(x.numel()));
}

/// Channel-axis concatenation; N, H, W must agree.
template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ShapeError("concat_channels: mismatched N/H/W " + to_string(sa) + " vs " + to_string(sb));
  }
  const Shape so{sa.n, sa.c + sb.c, sa.h, sa.w};
  Tensor<T> out(so);
  const std::size_t hw = sa.spatial();
  auto y = out.mutable_data();
  for (std::size_t n = 0; n < sa.n; ++n) {
    std::copy_n(a.data().begin() + n * sa.c * hw, sa.c * hw, y.begin() + n * so.c * hw);
    std::copy_n(b.data().begin() + n * sb.c * hw, sb.c * hw, y.begin() + (n * so.c + sa.c) * hw);
  }
  if (detail::recording<T>({&a, &b})) {
    auto pa = a.impl(), pb = b.impl(), po = out.impl();
    detail::record<T>("concat_channels", {pa, pb}, out, [pa, pb, po, sa, sb, so, hw] {
      const auto& g = po->grad;
      for (std::size_t n = 0; n < so.n; ++n) {
        if (pa->requires_grad) {
          auto& ga = pa->grad_buffer();
          for (std::size_t i = 0; i < sa.c * hw; ++i) ga[n * sa.c * hw + i] += g[n * so.c * hw + i];
        }
        if (pb->requires_grad) {
          auto& gb = pb->grad_buffer();
          for (std::size_t i = 0; i < sb.c * hw; ++i)
            gb[n * sb.c * hw + i] += g[(n * so.c + sa.c) * hw + i];
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Layout

/// Reinterprets the row-major data under a new shape of equal size.
template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape s) {
  if (s.numel() != x.numel()) {
    throw ShapeError("reshape: " + to_string(x.shape()) + " -> " + to_string(s));
  }
  Tensor<T> out(s, std::vector<T>(x.data().begin(), x.data().end()));
  if (detail::recording<T>({&x})) {
    auto px = x.impl(), po = out.impl();
    detail::record<T>("reshape", {px}, out, [px, po] {
      auto& gx = px->grad_buffer();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += po->grad[i];
    });
  }
  return out;
}

/// Axis permutation: output axis k is input axis perm[k].
template <class T>
Tensor<T> permute(const Tensor<T>& x, std::array<int, 4> perm) {
  const Shape& s = x.shape();
  const std::array<std::size_t, 4> dims{s.n, s.c, s.h, s.w};
  const std::array<std::size_t, 4> strides{s.c * s.h * s.w, s.h * s.w, s.w, 1};
  std::array<bool, 4> seen{};
  for (int p : perm) {
    if (p < 0 || p > 3 || seen[static_cast<std::size_t>(p)]) throw ShapeError("permute: invalid axis order");
    seen[static_cast<std::size_t>(p)] = true;
  }
  std::array<std::size_t, 4> od{}, os{};
  for (std::size_t k = 0; k < 4; ++k) {
    od[k] = dims[static_cast<std::size_t>(perm[k])];
    os[k] = strides[static_cast<std::size_t>(perm[k])];
  }
  Tensor<T> out(Shape{od[0], od[1], od[2], od[3]});
  // Source offset of each output element, in output order.
  std::vector<std::size_t> src(x.numel());
  std::size_t i = 0;
  for (std::size_t a = 0; a < od[0]; ++a)
    for (std::size_t b = 0; b < od[1]; ++b)
      for (std::size_t c = 0; c < od[2]; ++c)
        for (std::size_t d = 0; d < od[3]; ++d) src[i++] = a * os[0] + b * os[1] + c * os[2] + d * os[3];
  auto y = out.mutable_data();
  auto xd = x.data();
  for (std::size_t j = 0; j < y.size(); ++j) y[j] = xd[src[j]];
  if (detail::recording<T>({&x})) {
    auto px = x.impl(), po = out.impl();
    detail::record<T>("permute", {px}, out, [px, po, src = std::move(src)] {
      auto& gx = px->grad_buffer();
      for (std::size_t j = 0; j < src.size(); ++j) gx[src[j]] += po->grad[j];
    });
  }
  return out;
}

template <class T>
Tensor<T> transpose_last(const Tensor<T>& x) {
  return permute(x, {0, 1, 3, 2});
}

// ---------------------------------------------------------------------------
// Matrix products and attention

/// Treats (n, c) as the batch: (B, M, K) · (B, K, N) -> (B, M, N) with B = n·c.
template <class T>
Tensor<T> matmul_batched(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.n != sb.n || sa.c != sb.c || sa.w != sb.h) {
    throw ShapeError("matmul_batched: " + to_string(sa) + " x " + to_string(sb));
  }
  const std::size_t batch = sa.n * sa.c, m = sa.h, k = sa.w, n = sb.w;
  Tensor<T> out(Shape{sa.n, sa.c, m, n});
  for (std::size_t i = 0; i < batch; ++i) {
    gemm<T>(false, false, m, n, k, a.data().data() + i * m * k, b.data().data() + i * k * n,
            out.mutable_data().data() + i * m * n, false);
  }
  mac_counter() += batch * m * k * n;
  if (detail::recording<T>({&a, &b})) {
    auto pa = a.impl(), pb = b.impl(), po = out.impl();
    detail::record<T>("matmul_batched", {pa, pb}, out, [pa, pb, po, batch, m, k, n] {
      const T* g = po->grad.data();
      for (std::size_t i = 0; i < batch; ++i) {
        if (pa->requires_grad)
          gemm<T>(false, true, m, k, n, g + i * m * n, pb->data.data() + i * k * n,
                  pa->grad_buffer().data() + i * m * k, true);
        if (pb->requires_grad)
          gemm<T>(true, false, k, n, m, pa->data.data() + i * m * k, g + i * m * n,
                  pb->grad_buffer().data() + i * k * n, true);
      }
    });
  }
  return out;
}

namespace detail {
template <class T>
void softmax_row(const T* x, T* y, std::size_t len) {
  T mx = x[0];
  for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, x[j]);
  T sum = 0;
  for (std::size_t j = 0; j < len; ++j) {
    y[j] = std::exp(x[j] - mx);
    sum += y[j];
  }
  for (std::size_t j = 0; j < len; ++j) y[j] /= sum;
}
}  // namespace detail

/// Softmax over the last axis, stabilized by subtracting each row's max.
template <class T>
Tensor<T> softmax_last(const Tensor<T>& x) {
  for (T v : x.data()) {
    if (std::isnan(v)) throw NumericError("softmax: NaN input");
  }
  const std::size_t len = x.shape().w;
  const std::size_t rows = x.numel() / len;
  Tensor<T> out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    detail::softmax_row(x.data().data() + r * len, out.mutable_data().data() + r * len, len);
  }
  if (detail::recording<T>({&x})) {
    auto px = x.impl(), po = out.impl();
    detail::record<T>("softmax_last", {px}, out, [px, po, rows, len] {
      auto& gx = px->grad_buffer();
      const auto& y = po->data;
      const auto& g = po->grad;
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t base = r * len;
        T dot = 0;
        for (std::size_t j = 0; j < len; ++j) dot += g[base + j] * y[base + j];
        for (std::size_t j = 0; j < len; ++j) gx[base + j] += y[base + j] * (g[base + j] - dot);
      }
    });
  }
  return out;
}

/// softmax(q·kᵀ·scale) for (B, Lq, d) queries and (B, Lk, d) keys.
template <class T>
Tensor<T> attention_weights(const Tensor<T>& q, const Tensor<T>& k, T scale_factor) {
  return softmax_last(scale(matmul_batched(q, transpose_last(k)), scale_factor));
}

/// Scaled dot-product attention softmax(q·kᵀ·scale)·v over the (n, c) batch.
/// When nothing is being recorded, rows are streamed so the Lq×Lk score matrix
/// is never materialized.
template <class T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, T scale_factor) {
  const Shape& sq = q.shape();
  const Shape& sk = k.shape();
  const Shape& sv = v.shape();
  if (sq.n != sk.n || sq.c != sk.c || sq.w != sk.w || sk.n != sv.n || sk.c != sv.c || sk.h != sv.h) {
    throw ShapeError("attention: q " + to_string(sq) + " k " + to_string(sk) + " v " + to_string(sv));
  }
  if (detail::recording<T>({&q, &k, &v})) {
    return matmul_batched(attention_weights(q, k, scale_factor), v);
  }
  const std::size_t batch = sq.n * sq.c, lq = sq.h, lk = sk.h, d = sq.w, dv = sv.w;
  Tensor<T> out(Shape{sq.n, sq.c, lq, dv});
  std::vector<T> scores(lk), probs(lk);
  for (std::size_t b = 0; b < batch; ++b) {
    const T* qb = q.data().data() + b * lq * d;
    const T* kb = k.data().data() + b * lk * d;
    const T* vb = v.data().data() + b * lk * dv;
    T* ob = out.mutable_data().data() + b * lq * dv;
    for (std::size_t i = 0; i < lq; ++i) {
      for (std::size_t j = 0; j < lk; ++j) {
        T acc = 0;
        for (std::size_t t = 0; t < d; ++t) acc += qb[i * d + t] * kb[j * d + t];
        scores[j] = acc * scale_factor;
        if (std::isnan(scores[j])) throw NumericError("softmax: NaN input");
      }
      detail::softmax_row(scores.data(), probs.data(), lk);
      T* orow = ob + i * dv;
      for (std::size_t j = 0; j < lk; ++j) {
        const T p = probs[j];
        const T* vrow = vb + j * dv;
        for (std::size_t t = 0; t < dv; ++t) orow[t] += p * vrow[t];
      }
    }
  }
  mac_counter() += 2 * batch * lq * lk * d;
  return out;
}

/// Affine map over the last axis: (…, Din) -> (…, Dout). weight is (1,1,Dout,Din),
/// bias (optional) is (1,1,1,Dout).
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias) {
  const Shape& sx = x.shape();
  const Shape& sw = weight.shape();
  if (sw.n != 1 || sw.c != 1 || sw.w != sx.w) {
    throw ShapeError("linear: input " + to_string(sx) + " weight " + to_string(sw));
  }
  const std::size_t rows = sx.n * sx.c * sx.h, din = sx.w, dout = sw.h;
  if (bias != nullptr && bias->shape() != Shape{1, 1, 1, dout}) {
    throw ShapeError("linear: bias " + to_string(bias->shape()));
  }
  Tensor<T> out(Shape{sx.n, sx.c, sx.h, dout});
  T* y = out.mutable_data().data();
  gemm<T>(false, true, rows, dout, din, x.data().data(), weight.data().data(), y, false);
  if (bias != nullptr) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t o = 0; o < dout; ++o) y[r * dout + o] += bias->at(o);
  }
  mac_counter() += rows * din * dout;
  if (detail::recording<T>({&x, &weight, bias})) {
    auto px = x.impl(), pw = weight.impl(), po = out.impl();
    auto pb = bias != nullptr ? bias->impl() : nullptr;
    std::vector<std::shared_ptr<TensorImpl<T>>> ins{px, pw};
    if (pb) ins.push_back(pb);
    detail::record<T>("linear", std::move(ins), out, [px, pw, pb, po, rows, din, dout] {
      const T* g = po->grad.data();
      if (px->requires_grad)
        gemm<T>(false, false, rows, din, dout, g, pw->data.data(), px->grad_buffer().data(), true);
      if (pw->requires_grad)
        gemm<T>(true, false, dout, din, rows, g, px->data.data(), pw->grad_buffer().data(), true);
      if (pb && pb->requires_grad) {
        auto& gb = pb->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t o = 0; o < dout; ++o) gb[o] += g[r * dout + o];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convolution

struct Conv2dGeometry {
  std::size_t stride_h = 1, stride_w = 1;
  std::size_t pad_h = 0, pad_w = 0;
  std::size_t groups = 1;
};

/// Cross-correlation (no kernel flip) with zero padding.
/// weight: (Cout, Cin/groups, kH, kW); bias (optional): (1, Cout, 1, 1).
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias, Conv2dGeometry g) {
  const Shape& sx = x.shape();
  const Shape& sw = weight.shape();
  const std::size_t cout = sw.n, kh = sw.h, kw = sw.w;
  if (g.groups == 0 || sx.c % g.groups != 0 || cout % g.groups != 0 || sw.c * g.groups != sx.c) {
    throw ShapeError("conv2d: input channels " + std::to_string(sx.c) + " do not match weight " +
                     to_string(sw) + " with groups=" + std::to_string(g.groups));
  }
  if (bias != nullptr && bias->shape() != Shape{1, cout, 1, 1}) {
    throw ShapeError("conv2d: bias " + to_string(bias->shape()));
  }
  const std::size_t ho = detail::conv_out_size(sx.h, kh, g.stride_h, g.pad_h, "conv2d");
  const std::size_t wo = detail::conv_out_size(sx.w, kw, g.stride_w, g.pad_w, "conv2d");
  const std::size_t cin_g = sw.c, cout_g = cout / g.groups, kdim = cin_g * kh * kw;
  const std::size_t hw = sx.h * sx.w, howo = ho * wo;
  const bool pointwise = kh == 1 && kw == 1 && g.stride_h == 1 && g.stride_w == 1 && g.pad_h == 0 &&
                         g.pad_w == 0;
  Tensor<T> out(Shape{sx.n, cout, ho, wo});
  std::vector<T> col(pointwise ? 0 : kdim * howo);
  const T* xd = x.data().data();
  const T* wd = weight.data().data();
  T* yd = out.mutable_data().data();
  for (std::size_t n = 0; n < sx.n; ++n) {
    for (std::size_t gi = 0; gi < g.groups; ++gi) {
      const T* xg = xd + (n * sx.c + gi * cin_g) * hw;
      const T* src = xg;
      if (!pointwise) {
        detail::im2col(xg, cin_g, sx.h, sx.w, kh, kw, g.stride_h, g.stride_w, g.pad_h, g.pad_w, ho, wo,
                       col.data());
        src = col.data();
      }
      gemm<T>(false, false, cout_g, howo, kdim, wd + gi * cout_g * kdim, src,
              yd + (n * cout + gi * cout_g) * howo, false);
    }
    if (bias != nullptr) {
      for (std::size_t c = 0; c < cout; ++c) {
        const T b = bias->at(c);
        T* row = yd + (n * cout + c) * howo;
        for (std::size_t i = 0; i < howo; ++i) row[i] += b;
      }
    }
  }
  mac_counter() += sx.n * cout * kdim * howo;
  if (detail::recording<T>({&x, &weight, bias})) {
    auto px = x.impl(), pw = weight.impl(), po = out.impl();
    auto pb = bias != nullptr ? bias->impl() : nullptr;
    std::vector<std::shared_ptr<TensorImpl<T>>> ins{px, pw};
    if (pb) ins.push_back(pb);
    detail::record<T>("conv2d", std::move(ins), out,
                      [px, pw, pb, po, g, sx, cout, kh, kw, ho, wo, cin_g, cout_g, kdim, hw, howo, pointwise] {
      const T* gy = po->grad.data();
      if (pb && pb->requires_grad) {
        auto& gb = pb->grad_buffer();
        for (std::size_t n = 0; n < sx.n; ++n)
          for (std::size_t c = 0; c < cout; ++c) {
            T acc = 0;
            const T* row = gy + (n * cout + c) * howo;
            for (std::size_t i = 0; i < howo; ++i) acc += row[i];
            gb[c] += acc;
          }
      }
      const bool need_w = pw->requires_grad, need_x = px->requires_grad;
      if (!need_w && !need_x) return;
      std::vector<T> col(pointwise ? 0 : kdim * howo);
      for (std::size_t n = 0; n < sx.n; ++n) {
        for (std::size_t gi = 0; gi < g.groups; ++gi) {
          const T* gyg = gy + (n * cout + gi * cout_g) * howo;
          const T* wg = pw->data.data() + gi * cout_g * kdim;
          if (need_w) {
            const T* xg = px->data.data() + (n * sx.c + gi * cin_g) * hw;
            const T* src = xg;
            if (!pointwise) {
              detail::im2col(xg, cin_g, sx.h, sx.w, kh, kw, g.stride_h, g.stride_w, g.pad_h, g.pad_w, ho,
                             wo, col.data());
              src = col.data();
            }
            gemm<T>(false, true, cout_g, kdim, howo, gyg, src, pw->grad_buffer().data() + gi * cout_g * kdim,
                    true);
          }
          if (need_x) {
            T* gx = px->grad_buffer().data() + (n * sx.c + gi * cin_g) * hw;
            if (pointwise) {
              gemm<T>(true, false, kdim, howo, cout_g, wg, gyg, gx, true);
            } else {
              gemm<T>(true, false, kdim, howo, cout_g, wg, gyg, col.data(), false);
              detail::col2im(col.data(), cin_g, sx.h, sx.w, kh, kw, g.stride_h, g.stride_w, g.pad_h,
                             g.pad_w, ho, wo, gx);
            }
          }
        }
      }
    });
  }
  return out;
}

/// Reference convolution by the defining loop nest. Forward only; used to
/// cross-check the im2col path.
template <class T>
Tensor<T> conv2d_direct(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias,
                        Conv2dGeometry g) {
  const Shape& sx = x.shape();
  const Shape& sw = weight.shape();
  if (g.groups == 0 || sw.c * g.groups != sx.c || sw.n % g.groups != 0) {
    throw ShapeError("conv2d_direct: channel mismatch");
  }
  const std::size_t ho = detail::conv_out_size(sx.h, sw.h, g.stride_h, g.pad_h, "conv2d_direct");
  const std::size_t wo = detail::conv_out_size(sx.w, sw.w, g.stride_w, g.pad_w, "conv2d_direct");
  const std::size_t cout_g = sw.n / g.groups;
  Tensor<T> out(Shape{sx.n, sw.n, ho, wo});
  auto y = out.mutable_data();
  for (std::size_t n = 0; n < sx.n; ++n)
    for (std::size_t co = 0; co < sw.n; ++co) {
      const std::size_t gi = co / cout_g;
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox) {
          T acc = bias != nullptr ? bias->at(co) : T(0);
          for (std::size_t ci = 0; ci < sw.c; ++ci)
            for (std::size_t ki = 0; ki < sw.h; ++ki)
              for (std::size_t kj = 0; kj < sw.w; ++kj) {
                const long long iy = static_cast<long long>(oy * g.stride_h + ki) - static_cast<long long>(g.pad_h);
                const long long ix = static_cast<long long>(ox * g.stride_w + kj) - static_cast<long long>(g.pad_w);
                if (iy < 0 || ix < 0 || iy >= static_cast<long long>(sx.h) || ix >= static_cast<long long>(sx.w))
                  continue;
                acc += weight(co, ci, ki, kj) *
                       x(n, gi * sw.c + ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
              }
          y[((n * sw.n + co) * ho + oy) * wo + ox] = acc;
        }
    }
  return out;
}

/// Transposed convolution with kernel == stride-compatible geometry and no padding.
/// weight: (Cin, Cout, kH, kW); bias (optional): (1, Cout, 1, 1).
/// Output spatial size: (H − 1)·stride + kH.
template <class T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias,
                           std::size_t stride) {
  const Shape& sx = x.shape();
  const Shape& sw = weight.shape();
  if (sw.n != sx.c || stride == 0) {
    throw ShapeError("conv_transpose2d: input " + to_string(sx) + " weight " + to_string(sw));
  }
  const std::size_t cin = sx.c, cout = sw.c, kh = sw.h, kw = sw.w;
  const std::size_t ho = (sx.h - 1) * stride + kh, wo = (sx.w - 1) * stride + kw;
  const std::size_t hw = sx.h * sx.w, kdim = cout * kh * kw;
  if (bias != nullptr && bias->shape() != Shape{1, cout, 1, 1}) {
    throw ShapeError("conv_transpose2d: bias " + to_string(bias->shape()));
  }
  Tensor<T> out(Shape{sx.n, cout, ho, wo});
  std::vector<T> col(kdim * hw);
  for (std::size_t n = 0; n < sx.n; ++n) {
    gemm<T>(true, false, kdim, hw, cin, weight.data().data(), x.data().data() + n * cin * hw, col.data(),
            false);
    T* yn = out.mutable_data().data() + n * cout * ho * wo;
    detail::col2im(col.data(), cout, ho, wo, kh, kw, stride, stride, 0, 0, sx.h, sx.w, yn);
    if (bias != nullptr) {
      for (std::size_t c = 0; c < cout; ++c)
        for (std::size_t i = 0; i < ho * wo; ++i) yn[c * ho * wo + i] += bias->at(c);
    }
  }
  mac_counter() += sx.n * cin * kdim * hw;
  if (detail::recording<T>({&x, &weight, bias})) {
    auto px = x.impl(), pw = weight.impl(), po = out.impl();
    auto pb = bias != nullptr ? bias->impl() : nullptr;
    std::vector<std::shared_ptr<TensorImpl<T>>> ins{px, pw};
    if (pb) ins.push_back(pb);
    detail::record<T>("conv_transpose2d", std::move(ins), out,
                      [px, pw, pb, po, sx, cin, cout, kh, kw, ho, wo, hw, kdim, stride] {
      std::vector<T> dcol(kdim * hw);
      for (std::size_t n = 0; n < sx.n; ++n) {
        const T* gy = po->grad.data() + n * cout * ho * wo;
        if (pb && pb->requires_grad) {
          auto& gb = pb->grad_buffer();
          for (std::size_t c = 0; c < cout; ++c) {
            T acc = 0;
            for (std::size_t i = 0; i < ho * wo; ++i) acc += gy[c * ho * wo + i];
            gb[c] += acc;
          }
        }
        if (!px->requires_grad && !pw->requires_grad) continue;
        detail::im2col(gy, cout, ho, wo, kh, kw, stride, stride, 0, 0, sx.h, sx.w, dcol.data());
        if (px->requires_grad)
          gemm<T>(false, false, cin, hw, kdim, pw->data.data(), dcol.data(),
                  px->grad_buffer().data() + n * cin * hw, true);
        if (pw->requires_grad)
          gemm<T>(false, true, cin, kdim, hw, px->data.data() + n * cin * hw, dcol.data(),
                  pw->grad_buffer().data(), true);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization

/// Batch-statistics normalization per channel. Writes the batch mean and the
/// biased batch variance into the given spans (length C).
template <class T>
Tensor<T> batch_norm_train(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps,
                           std::span<double> batch_mean, std::span<double> batch_var) {
  const Shape& s = x.shape();
  const std::size_t count = s.n * s.h * s.w, hw = s.spatial();
  if (count < 2) {
    throw ShapeError("batch_norm: train mode needs n*h*w >= 2, got " + to_string(s));
  }
  if (gamma.numel() != s.c || beta.numel() != s.c) {
    throw ShapeError("batch_norm: " + std::to_string(gamma.numel()) + " params for " +
                     std::to_string(s.c) + " channels");
  }
  Tensor<T> out(s);
  std::vector<T> xhat(x.numel()), inv_std(s.c);
  auto xd = x.data();
  auto y = out.mutable_data();
  for (std::size_t c = 0; c < s.c; ++c) {
    double sum = 0;
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t i = 0; i < hw; ++i) sum += xd[(n * s.c + c) * hw + i];
    const double mean = sum / static_cast<double>(count);
    double sq = 0;
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t i = 0; i < hw; ++i) {
        const double d = xd[(n * s.c + c) * hw + i] - mean;
        sq += d * d;
      }
    const double var = sq / static_cast<double>(count);
    batch_mean[c] = mean;
    batch_var[c] = var;
    const T istd = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
    inv_std[c] = istd;
    const T gm = gamma.at(c), bt = beta.at(c), mu = static_cast<T>(mean);
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t i = 0; i < hw; ++i) {
        const std::size_t j = (n * s.c + c) * hw + i;
        xhat[j] = (xd[j] - mu) * istd;
        y[j] = gm * xhat[j] + bt;
      }
  }
  if (detail::recording<T>({&x, &gamma, &beta})) {
    auto px = x.impl(), pg = gamma.impl(), pb = beta.impl(), po = out.impl();
    detail::record<T>("batch_norm_train", {px, pg, pb}, out,
                      [px, pg, pb, po, s, hw, count, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
      const auto& g = po->grad;
      for (std::size_t c = 0; c < s.c; ++c) {
        T sum_g = 0, sum_gx = 0;
        for (std::size_t n = 0; n < s.n; ++n)
          for (std::size_t i = 0; i < hw; ++i) {
            const std::size_t j = (n * s.c + c) * hw + i;
            sum_g += g[j];
            sum_gx += g[j] * xhat[j];
          }
        if (pg->requires_grad) pg->grad_buffer()[c] += sum_gx;
        if (pb->requires_grad) pb->grad_buffer()[c] += sum_g;
        if (px->requires_grad) {
          auto& gx = px->grad_buffer();
          const T k = pg->data[c] * inv_std[c] / static_cast<T>(count);
          const T cnt = static_cast<T>(count);
          for (std::size_t n = 0; n < s.n; ++n)
            for (std::size_t i = 0; i < hw; ++i) {
              const std::size_t j = (n * s.c + c) * hw + i;
              gx[j] += k * (cnt * g[j] - sum_g - xhat[j] * sum_gx);
            }
        }
      }
    });
  }
  return out;
}

/// Normalization with fixed statistics: a per-channel affine map.
template <class T>
Tensor<T> batch_norm_eval(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                          const Tensor<T>& running_mean, const Tensor<T>& running_var, T eps) {
  const Shape& s = x.shape();
  if (gamma.numel() != s.c || beta.numel() != s.c || running_mean.numel() != s.c ||
      running_var.numel() != s.c) {
    throw ShapeError("batch_norm: parameter size does not match " + std::to_string(s.c) + " channels");
  }
  const std::size_t hw = s.spatial();
  Tensor<T> out(s);
  auto y = out.mutable_data();
  auto xd = x.data();
  std::vector<T> inv_std(s.c);
  for (std::size_t c = 0; c < s.c; ++c) {
    inv_std[c] = T(1) / std::sqrt(running_var.at(c) + eps);
    const T gm = gamma.at(c), bt = beta.at(c), mu = running_mean.at(c);
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t i = 0; i < hw; ++i) {
        const std::size_t j = (n * s.c + c) * hw + i;
        y[j] = gm * ((xd[j] - mu) * inv_std[c]) + bt;
      }
  }
  if (detail::recording<T>({&x, &gamma, &beta})) {
    auto px = x.impl(), pg = gamma.impl(), pb = beta.impl(), po = out.impl();
    auto pm = running_mean.impl();
    detail::record<T>("batch_norm_eval", {px, pg, pb}, out, [px, pg, pb, pm, po, s, hw, inv_std] {
      const auto& g = po->grad;
      for (std::size_t c = 0; c < s.c; ++c) {
        T sum_g = 0, sum_gx = 0;
        for (std::size_t n = 0; n < s.n; ++n)
          for (std::size_t i = 0; i < hw; ++i) {
            const std::size_t j = (n * s.c + c) * hw + i;
            sum_g += g[j];
            sum_gx += g[j] * (px->data[j] - pm->data[c]) * inv_std[c];
            if (px->requires_grad) px->grad_buffer()[j] += g[j] * pg->data[c] * inv_std[c];
          }
        if (pg->requires_grad) pg->grad_buffer()[c] += sum_gx;
        if (pb->requires_grad) pb->grad_buffer()[c] += sum_g;
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Resampling

enum class PoolKind { kMax, kAvg };

template <class T>
Tensor<T> pool2d(const Tensor<T>& x, PoolKind kind, std::size_t kh, std::size_t kw, std::size_t sh,
                 std::size_t sw) {
  const Shape& s = x.shape();
  const std::size_t ho = detail::conv_out_size(s.h, kh, sh, 0, "pool2d");
  const std::size_t wo = detail::conv_out_size(s.w, kw, sw, 0, "pool2d");
  Tensor<T> out(Shape{s.n, s.c, ho, wo});
  auto y = out.mutable_data();
  auto xd = x.data();
  std::vector<std::size_t> argmax(kind == PoolKind::kMax ? out.numel() : 0);
  const T inv_area = T(1) / static_cast<T>(kh * kw);
  for (std::size_t p = 0; p < s.n * s.c; ++p)
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const std::size_t o = (p * ho + oy) * wo + ox;
        if (kind == PoolKind::kMax) {
          std::size_t best = (p * s.h + oy * sh) * s.w + ox * sw;
          for (std::size_t i = 0; i < kh; ++i)
            for (std::size_t j = 0; j < kw; ++j) {
              const std::size_t idx = (p * s.h + oy * sh + i) * s.w + ox * sw + j;
              if (xd[idx] > xd[best]) best = idx;  // first maximum wins ties
            }
          argmax[o] = best;
          y[o] = xd[best];
        } else {
          T acc = 0;
          for (std::size_t i = 0; i < kh; ++i)
            for (std::size_t j = 0; j < kw; ++j) acc += xd[(p * s.h + oy * sh + i) * s.w + ox * sw + j];
          y[o] = acc * inv_area;
        }
      }
  if (detail::recording<T>({&x})) {
    auto px = x.impl(), po = out.impl();
    detail::record<T>("pool2d", {px}, out,
                      [px, po, kind, argmax = std::move(argmax), s, ho, wo, kh, kw, sh, sw, inv_area] {
      auto& gx = px->grad_buffer();
      const auto& g = po->grad;
      if (kind == PoolKind::kMax) {
        for (std::size_t o = 0; o < g.size(); ++o) gx[argmax[o]] += g[o];
        return;
      }
      for (std::size_t p = 0; p < s.n * s.c; ++p)
        for (std::size_t oy = 0; oy < ho; ++oy)
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const T v = g[(p * ho + oy) * wo + ox] * inv_area;
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) gx[(p * s.h + oy * sh + i) * s.w + ox * sw + j] += v;
          }
    });
  }
  return out;
}

namespace detail {
// Element permutation shared by pixel shuffle and its inverse: entry i of the
// returned table is the input offset feeding shuffled output element i.
inline std::vector<std::size_t> pixel_shuffle_table(const Shape& in, std::size_t r) {
  const std::size_t oc = in.c / (r * r), oh = in.h * r, ow = in.w * r;
  std::vector<std::size_t> table(in.numel());
  std::size_t o = 0;
  for (std::size_t n = 0; n < in.n; ++n)
    for (std::size_t c = 0; c < oc; ++c)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
          const std::size_t i = y % r, j = x % r;
          const std::size_t ic = c * r * r + i * r + j;
          table[o++] = ((n * in.c + ic) * in.h + y / r) * in.w + x / r;
        }
  return table;
}

template <class T>
Tensor<T> gather(const char* name, const Tensor<T>& x, Shape out_shape, std::vector<std::size_t> src) {
  Tensor<T> out(out_shape);
  auto y = out.mutable_data();
  auto xd = x.data();
  for (std::size_t i = 0; i < src.size(); ++i) y[i] = xd[src[i]];
  if (recording<T>({&x})) {
    auto px = x.impl(), po = out.impl();
    record<T>(name, {px}, out, [px, po, src = std::move(src)] {
      auto& gx = px->grad_buffer();
      for (std::size_t i = 0; i < src.size(); ++i) gx[src[i]] += po->grad[i];
    });
  }
  return out;
}
}  // namespace detail

/// (N, C·r², H, W) -> (N, C, H·r, W·r) with
/// out[n, c, h·r + i, w·r + j] = in[n, c·r² + i·r + j, h, w].
template <class T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, std::size_t r) {
  const Shape& s = x.shape();
  if (r == 0 || s.c % (r * r) != 0) {
    throw ShapeError("pixel_shuffle: channels " + std::to_string(s.c) + " not divisible by r^2 = " +
                     std::to_string(r * r));
  }
  return detail::gather("pixel_shuffle", x, Shape{s.n, s.c / (r * r), s.h * r, s.w * r},
                        detail::pixel_shuffle_table(s, r));
}

/// Exact inverse of pixel_shuffle.
template <class T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, std::size_t r) {
  const Shape& s = x.shape();
  if (r == 0 || s.h % r != 0 || s.w % r != 0) {
    throw ShapeError("pixel_unshuffle: spatial " + to_string(s) + " not divisible by " + std::to_string(r));
  }
  const Shape in{s.n, s.c * r * r, s.h / r, s.w / r};
  const auto forward = detail::pixel_shuffle_table(in, r);
  std::vector<std::size_t> inverse(forward.size());
  for (std::size_t i = 0; i < forward.size(); ++i) inverse[forward[i]] = i;
  return detail::gather("pixel_unshuffle", x, in, std::move(inverse));
}

/// Channel-to-space rearrangement with the channel index read as
/// (i·r + j)·C + c, i.e. "(p1 p2 c) -> (h p1) (w p2) c" token expansion.
template <class T>
Tensor<T> patch_rearrange(const Tensor<T>& x, std::size_t r) {
  const Shape& s = x.shape();
  if (r == 0 || s.c % (r * r) != 0) {
    throw ShapeError("patch_rearrange: channels " + std::to_string(s.c) + " not divisible by r^2");
  }
  const std::size_t oc = s.c / (r * r);
  const Shape so{s.n, oc, s.h * r, s.w * r};
  std::vector<std::size_t> src(so.numel());
  std::size_t o = 0;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < oc; ++c)
      for (std::size_t y = 0; y < so.h; ++y)
        for (std::size_t xx = 0; xx < so.w; ++xx) {
          const std::size_t ic = ((y % r) * r + xx % r) * oc + c;
          src[o++] = ((n * s.c + ic) * s.h + y / r) * s.w + xx / r;
        }
  return detail::gather("patch_rearrange", x, so, std::move(src));
}

template <class T>
Tensor<T> upsample_nearest(const Tensor<T>& x, std::size_t r) {
  const Shape& s = x.shape();
  const Shape so{s.n, s.c, s.h * r, s.w * r};
  std::vector<std::size_t> src(so.numel());
  std::size_t o = 0;
  for (std::size_t p = 0; p < s.n * s.c; ++p)
    for (std::size_t y = 0; y < so.h; ++y)
      for (std::size_t xx = 0; xx < so.w; ++xx) src[o++] = (p * s.h + y / r) * s.w + xx / r;
  return detail::gather("upsample_nearest", x, so, std::move(src));
}

namespace detail {
struct LerpTap {
  std::size_t i0, i1;
  double w0, w1;
};
// Half-pixel-center source coordinates (align_corners = false).
inline std::vector<LerpTap> lerp_taps(std::size_t in, std::size_t r) {
  std::vector<LerpTap> taps(in * r);
  for (std::size_t o = 0; o < taps.size(); ++o) {
    double src = (static_cast<double>(o) + 0.5) / static_cast<double>(r) - 0.5;
    if (src < 0) src = 0;
    auto i0 = static_cast<std::size_t>(src);
    if (i0 > in - 1) i0 = in - 1;
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    const double w1 = src - static_cast<double>(i0);
    taps[o] = {i0, i1, 1.0 - w1, w1};
  }
  return taps;
}
}  // namespace detail

/// Bilinear upsampling by an integer factor with half-pixel centers.
template <class T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, std::size_t r) {
  const Shape& s = x.shape();
  const Shape so{s.n, s.c, s.h * r, s.w * r};
  const auto ty = detail::lerp_taps(s.h, r);
  const auto tx = detail::lerp_taps(s.w, r);
  Tensor<T> out(so);
  auto y = out.mutable_data();
  auto xd = x.data();
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    const T* src = xd.data() + p * s.h * s.w;
    for (std::size_t oy = 0; oy < so.h; ++oy)
      for (std::size_t ox = 0; ox < so.w; ++ox) {
        const auto& a = ty[oy];
        const auto& b = tx[ox];
        const T v = static_cast<T>(a.w0 * b.w0) * src[a.i0 * s.w + b.i0] +
                    static_cast<T>(a.w0 * b.w1) * src[a.i0 * s.w + b.i1] +
                    static_cast<T>(a.w1 * b.w0) * src[a.i1 * s.w + b.i0] +
                    static_cast<T>(a.w1 * b.w1) * src[a.i1 * s.w + b.i1];
        y[(p * so.h + oy) * so.w + ox] = v;
      }
  }
  if (detail::recording<T>({&x})) {
    auto px = x.impl(), po = out.impl();
    detail::record<T>("upsample_bilinear", {px}, out, [px, po, s, so, ty, tx] {
      auto& gx = px->grad_buffer();
      const auto& g = po->grad;
      for (std::size_t p = 0; p < s.n * s.c; ++p) {
        T* dst = gx.data() + p * s.h * s.w;
        for (std::size_t oy = 0; oy < so.h; ++oy)
          for (std::size_t ox = 0; ox < so.w; ++ox) {
            const T v = g[(p * so.h + oy) * so.w + ox];
            const auto& a = ty[oy];
            const auto& b = tx[ox];
            dst[a.i0 * s.w + b.i0] += static_cast<T>(a.w0 * b.w0) * v;
            dst[a.i0 * s.w + b.i1] += static_cast<T>(a.w0 * b.w1) * v;
            dst[a.i1 * s.w + b.i0] += static_cast<T>(a.w1 * b.w0) * v;
            dst[a.i1 * s.w + b.i1] += static_cast<T>(a.w1 * b.w1) * v;
          }
      }
    });
  }
  return out;
}

}  // namespace lpca
