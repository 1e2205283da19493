#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "segan/error.hpp"

namespace segan {

// Dense row-major shapes. Images are H x W x C (channel-last), batches are
// N x H x W x C, scalars are {1}.
using Shape = std::vector<int>;

inline int numel(const Shape& s) {
  int n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // allocated lazily during backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<T>>> parents;
  // Reads this node's grad and accumulates into parents' grads. Own-node
  // metadata is captured in the closure when the op records itself.
  std::function<void(Node<T>&)> backward_fn;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
  }
};

// Thread-local switch: when false, ops compute values but record no tape.
inline bool& grad_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

struct NoGradGuard {
  NoGradGuard() : prev_(detail::grad_enabled_flag()) { detail::grad_enabled_flag() = false; }
  ~NoGradGuard() { detail::grad_enabled_flag() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

inline bool grad_enabled() { return detail::grad_enabled_flag(); }

template <typename T>
class Tensor {
 public:
  using Scalar = T;

  Tensor() = default;

  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false) {
    if (static_cast<int>(values.size()) != numel(shape))
      throw ShapeError("tensor data size " + std::to_string(values.size()) +
                       " does not match shape " + shape_str(shape));
    Tensor t;
    t.node_ = std::make_shared<detail::Node<T>>();
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(values);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<T> v(static_cast<size_t>(numel(shape)), T(0));
    return from(std::move(shape), std::move(v), requires_grad);
  }

  static Tensor full(Shape shape, T value, bool requires_grad = false) {
    std::vector<T> v(static_cast<size_t>(numel(shape)), value);
    return from(std::move(shape), std::move(v), requires_grad);
  }

  static Tensor scalar(T value, bool requires_grad = false) {
    return from(Shape{1}, std::vector<T>{value}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int size() const { return numel(node_->shape); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  std::span<const T> value() const { return node_->value; }
  std::span<T> value_mut() { return node_->value; }

  bool has_grad() const { return node_ && !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> grad_mut() {
    node_->ensure_grad();
    return node_->grad;
  }

  T item() const {
    if (size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
    return node_->value[0];
  }

  void zero_grad() {
    if (node_) node_->grad.assign(node_->grad.size(), T(0));
  }

  // Value copy with no tape attached; never requires grad.
  Tensor detach() const {
    Tensor t;
    t.node_ = std::make_shared<detail::Node<T>>();
    t.node_->shape = node_->shape;
    t.node_->value = node_->value;
    t.node_->requires_grad = false;
    return t;
  }

  // Reverse-mode sweep from a scalar root. Visits each recorded op exactly
  // once in reverse topological order and accumulates into leaf grads.
  void backward() {
    if (!node_) throw ShapeError("backward() on empty tensor");
    if (size() != 1) throw ShapeError("backward() requires a scalar root, got " + shape_str(shape()));
    std::vector<detail::Node<T>*> order;
    topo_sort(order);
    node_->ensure_grad();
    node_->grad[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      detail::Node<T>* n = *it;
      if (n->backward_fn && n->requires_grad) n->backward_fn(*n);
    }
  }

  std::shared_ptr<detail::Node<T>>& node() { return node_; }
  const std::shared_ptr<detail::Node<T>>& node() const { return node_; }

 private:
  void topo_sort(std::vector<detail::Node<T>*>& order) {
    // Iterative post-order DFS over parents; traversal order depends only on
    // graph structure, so sweeps are deterministic.
    std::unordered_set<detail::Node<T>*> visited;
    std::vector<std::pair<detail::Node<T>*, size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, idx] = stack.back();
      if (idx < n->parents.size()) {
        detail::Node<T>* p = n->parents[idx].get();
        ++idx;
        if (p->requires_grad && !visited.count(p)) {
          visited.insert(p);
          stack.emplace_back(p, 0);
        }
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
  }

  std::shared_ptr<detail::Node<T>> node_;
};

namespace detail {

// Allocates the output node for an op and records the tape entry when grad
// mode is on and any input needs gradients.
template <typename T>
Tensor<T> make_op_output(Shape shape, std::vector<T> value, std::vector<Tensor<T>> inputs,
                         std::function<void(Node<T>&)> backward_fn) {
  Tensor<T> out = Tensor<T>::from(std::move(shape), std::move(value));
  bool needs = false;
  if (grad_enabled_flag()) {
    for (const auto& in : inputs)
      if (in.requires_grad()) {
        needs = true;
        break;
      }
  }
  if (needs) {
    out.node()->requires_grad = true;
    out.node()->parents.reserve(inputs.size());
    for (auto& in : inputs) out.node()->parents.push_back(in.node());
    out.node()->backward_fn = std::move(backward_fn);
  }
  return out;
}

template <typename T>
void accumulate(Node<T>& target, const T* src, size_t n) {
  target.ensure_grad();
  T* dst = target.grad.data();
  for (size_t i = 0; i < n; ++i) dst[i] += src[i];
}

}  // namespace detail

// A named trainable (or tracked) tensor. Clip bounds, when present, are
// applied by clip steps after optimizer updates. `frozen` makes the bytes
// immutable for the whole of training: no optimizer update and, for
// batch-norm running statistics, no forward-pass update either.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
  bool trainable = true;
  bool frozen = false;
  std::optional<std::pair<T, T>> clip_bounds;
};

}  // namespace segan
