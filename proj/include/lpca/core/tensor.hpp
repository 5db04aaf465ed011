#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lpca/core/error.hpp"

namespace lpca {

/// NCHW extents. Every dimension is at least 1.
struct Shape {
  std::size_t n = 1;
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  constexpr std::size_t numel() const { return n * c * h * w; }
  constexpr std::size_t spatial() const { return h * w; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) +
         "," + std::to_string(s.w) + ")";
}

inline void check_shape(const Shape& s) {
  if (s.n == 0 || s.c == 0 || s.h == 0 || s.w == 0) {
    throw ShapeError("tensor dims must be >= 1, got " + to_string(s));
  }
}

template <class T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a backward pass touches it
  bool requires_grad = false;
  bool is_leaf = true;

  std::vector<T>& grad_buffer() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    return grad;
  }
};

/// Rank-4 NCHW tensor handle. Copies share storage; use clone() for a deep copy.
template <class T>
class Tensor {
 public:
  using value_type = T;
  using Impl = TensorImpl<T>;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0)) : impl_(std::make_shared<Impl>()) {
    check_shape(shape);
    impl_->shape = shape;
    impl_->data.assign(shape.numel(), fill);
  }

  Tensor(Shape shape, std::vector<T> values) : impl_(std::make_shared<Impl>()) {
    check_shape(shape);
    if (values.size() != shape.numel()) {
      throw ShapeError("data length " + std::to_string(values.size()) + " does not match shape " +
                       to_string(shape));
    }
    impl_->shape = shape;
    impl_->data = std::move(values);
  }

  static Tensor zeros(Shape shape) { return Tensor(shape, T(0)); }
  static Tensor ones(Shape shape) { return Tensor(shape, T(1)); }
  static Tensor full(Shape shape, T v) { return Tensor(shape, v); }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const T> data() const { return impl_->data; }
  // Mutation is reserved for initialization, optimizer steps, and gradient checking.
  std::span<T> mutable_data() { return impl_->data; }

  T at(std::size_t i) const { return impl_->data[i]; }
  T operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    const Shape& s = impl_->shape;
    return impl_->data[((n * s.c + c) * s.h + h) * s.w + w];
  }
  T item() const {
    if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + to_string(shape()));
    return impl_->data[0];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    impl_->requires_grad = on;
    return *this;
  }
  bool is_leaf() const { return impl_->is_leaf; }

  bool has_grad() const { return impl_->grad.size() == impl_->data.size(); }
  std::span<const T> grad() const { return impl_->grad; }
  std::span<T> mutable_grad() { return impl_->grad_buffer(); }
  void zero_grad() { std::fill(impl_->grad.begin(), impl_->grad.end(), T(0)); }

  Tensor clone() const {
    Tensor out(shape(), impl_->data);
    out.impl_->requires_grad = impl_->requires_grad;
    return out;
  }

  // Copies values (not grads) from another tensor of the same shape.
  void assign(const Tensor& other) {
    if (other.shape() != shape()) {
      throw ShapeError("assign: " + to_string(other.shape()) + " into " + to_string(shape()));
    }
    impl_->data = other.impl_->data;
  }

  const std::shared_ptr<Impl>& impl() const { return impl_; }
  static Tensor from_impl(std::shared_ptr<Impl> p) {
    Tensor t;
    t.impl_ = std::move(p);
    return t;
  }

 private:
  std::shared_ptr<Impl> impl_;
};

/// Ordered record of differentiable operations. Nodes are appended in execution
/// order, so inputs always precede the nodes that consume them.
template <class T>
class Tape {
 public:
  using ImplPtr = std::shared_ptr<TensorImpl<T>>;

  struct Node {
    std::string op;
    std::vector<ImplPtr> inputs;
    ImplPtr output;
    std::function<void()> backward;
  };

  void record(Node node) { nodes_.push_back(std::move(node)); }

  std::size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  void clear() { nodes_.clear(); }

  /// Propagates d(loss)/d(.) to every requires_grad leaf. Leaf grads accumulate
  /// across calls; intermediate buffers are reset at the start of each pass.
  void backward(const Tensor<T>& loss) {
    if (loss.numel() != 1) {
      throw ShapeError("backward needs a scalar loss, got " + to_string(loss.shape()));
    }
    for (auto& node : nodes_) {
      if (!node.output->is_leaf) {
        node.output->grad.assign(node.output->data.size(), T(0));
      }
    }
    loss.impl()->grad_buffer()[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      it->backward();
    }
  }

 private:
  std::vector<Node> nodes_;
};

namespace detail {
template <class T>
Tape<T>*& active_tape_slot() {
  thread_local Tape<T>* tape = nullptr;
  return tape;
}
}  // namespace detail

template <class T>
Tape<T>* active_tape() {
  return detail::active_tape_slot<T>();
}

/// Makes `tape` the recording target for the current thread while in scope.
template <class T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape) : previous_(detail::active_tape_slot<T>()) {
    detail::active_tape_slot<T>() = &tape;
  }
  ~TapeScope() { detail::active_tape_slot<T>() = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* previous_;
};

/// Suspends recording for the current thread while in scope.
template <class T>
class NoGradScope {
 public:
  NoGradScope() : previous_(detail::active_tape_slot<T>()) { detail::active_tape_slot<T>() = nullptr; }
  ~NoGradScope() { detail::active_tape_slot<T>() = previous_; }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape<T>* previous_;
};

/// Convenience: record `f()` on a fresh tape, then backpropagate its result.
template <class T, class F>
Tensor<T> backward_of(F&& f) {
  Tape<T> tape;
  Tensor<T> loss;
  {
    TapeScope<T> scope(tape);
    loss = f();
  }
  tape.backward(loss);
  return loss;
}

}  // namespace lpca
