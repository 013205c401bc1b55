#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "bcnet/numeric/error.hpp"

namespace bcnet {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace detail {

// One vertex of the recorded computation. Leaves have no parents; every
// other node owns its parents so that the graph lives exactly as long as the
// tensors that reference it.
template <class Real>
struct node {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<node>> parents;
  std::function<void(node&)> backward;

  bool is_leaf() const { return parents.empty(); }

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), Real(0));
  }
};

}  // namespace detail

// Dense row-major array of rank <= 3 with optional reverse-mode gradient.
//
// Tensors have shared (handle) semantics: copying a tensor copies the handle,
// not the storage. Values are immutable after construction except through
// mutable_values() on leaves, which the optimizer and finite-difference
// checks use to update parameters in place.
template <class Real>
class basic_tensor {
 public:
  using value_type = Real;
  using node_type = detail::node<Real>;

  basic_tensor() = default;

  static basic_tensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<Real> values(shape_size(shape), Real(0));
    return from_values(std::move(shape), std::move(values), requires_grad);
  }

  static basic_tensor filled(Shape shape, Real value, bool requires_grad = false) {
    std::vector<Real> values(shape_size(shape), value);
    return from_values(std::move(shape), std::move(values), requires_grad);
  }

  static basic_tensor from_values(Shape shape, std::vector<Real> values,
                                  bool requires_grad = false) {
    if (shape.size() > 3) {
      throw dimension_error("tensor rank " + std::to_string(shape.size()) +
                            " exceeds 3");
    }
    if (shape_size(shape) != values.size()) {
      throw dimension_error("shape " + shape_string(shape) + " holds " +
                            std::to_string(shape_size(shape)) +
                            " values, got " + std::to_string(values.size()));
    }
    auto n = std::make_shared<node_type>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    return basic_tensor(std::move(n));
  }

  static basic_tensor vector(std::vector<Real> values, bool requires_grad = false) {
    Shape shape{values.size()};
    return from_values(std::move(shape), std::move(values), requires_grad);
  }

  static basic_tensor matrix(std::size_t rows, std::size_t cols,
                             std::vector<Real> values, bool requires_grad = false) {
    return from_values({rows, cols}, std::move(values), requires_grad);
  }

  static basic_tensor scalar(Real value, bool requires_grad = false) {
    return from_values({}, {value}, requires_grad);
  }

  bool defined() const { return static_cast<bool>(node_); }
  explicit operator bool() const { return defined(); }

  const Shape& shape() const { return checked().shape; }
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const { return checked().value.size(); }
  std::size_t dim(std::size_t axis) const {
    if (axis >= rank()) {
      throw dimension_error("axis " + std::to_string(axis) + " out of range for " +
                            shape_string(shape()));
    }
    return shape()[axis];
  }
  std::size_t rows() const { return dim(0); }
  std::size_t cols() const { return dim(1); }

  std::span<const Real> values() const { return checked().value; }
  const Real* data() const { return checked().value.data(); }

  // Write access for leaves only; intermediate results are immutable.
  std::span<Real> mutable_values() {
    if (!checked().is_leaf()) {
      throw contract_error("mutable_values() on non-leaf tensor produced by " +
                           std::string(node_->op));
    }
    return node_->value;
  }

  bool requires_grad() const { return checked().requires_grad; }
  void set_requires_grad(bool on) {
    if (!checked().is_leaf()) {
      throw contract_error("requires_grad can only be toggled on leaves");
    }
    node_->requires_grad = on;
  }

  bool has_grad() const { return checked().grad.size() == size(); }
  std::span<const Real> grad() const { return checked().grad; }
  void zero_grad() { checked().grad.clear(); }

  const char* op() const { return checked().op; }
  bool is_leaf() const { return checked().is_leaf(); }

  Real item() const {
    if (size() != 1) {
      throw contract_error("item() on tensor of shape " + shape_string(shape()));
    }
    return node_->value[0];
  }
  Real operator[](std::size_t i) const { return checked().value.at(i); }
  Real at(std::size_t i, std::size_t j) const {
    return checked().value.at(i * cols() + j);
  }

  std::vector<Real> to_vector() const {
    return {values().begin(), values().end()};
  }

  // A new leaf holding a copy of the values, disconnected from the graph.
  basic_tensor detach(bool requires_grad = false) const {
    return from_values(shape(), to_vector(), requires_grad);
  }

  template <class To>
  basic_tensor<To> cast(bool requires_grad = false) const {
    std::vector<To> out(size());
    std::transform(values().begin(), values().end(), out.begin(),
                   [](Real v) { return static_cast<To>(v); });
    return basic_tensor<To>::from_values(shape(), std::move(out), requires_grad);
  }

  // Reverse-mode accumulation from a scalar. Leaf gradients accumulate across
  // calls; intermediate gradients are reset first.
  void backward() const {
    if (size() != 1 || rank() != 0) {
      throw contract_error("backward() requires a scalar loss, got shape " +
                           shape_string(shape()));
    }
    if (!node_->requires_grad) {
      throw contract_error("backward() on a loss that does not depend on any "
                           "tensor requiring grad");
    }
    std::vector<node_type*> order = topological_order();
    for (node_type* n : order) {
      if (!n->is_leaf()) n->grad.clear();
    }
    node_->ensure_grad();
    node_->grad[0] += Real(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      node_type* n = *it;
      if (n->is_leaf() || n->grad.empty() || !n->backward) continue;
      n->backward(*n);
    }
  }

  std::shared_ptr<node_type> node() const { return node_; }
  explicit basic_tensor(std::shared_ptr<node_type> n) : node_(std::move(n)) {}

 private:
  node_type& checked() const {
    if (!node_) throw contract_error("use of an undefined tensor");
    return *node_;
  }

  // Post-order over nodes that require grad; parents precede children.
  std::vector<node_type*> topological_order() const {
    std::vector<node_type*> order;
    std::unordered_set<node_type*> visited;
    std::vector<std::pair<node_type*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        node_type* p = n->parents[next++].get();
        if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
    return order;
  }

  std::shared_ptr<node_type> node_;
};

using Tensor = basic_tensor<double>;

namespace detail {

inline bool& grad_recording() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

// While alive, operators on this thread record no graph (inference mode).
class no_grad_guard {
 public:
  no_grad_guard() : previous_(detail::grad_recording()) { detail::grad_recording() = false; }
  ~no_grad_guard() { detail::grad_recording() = previous_; }
  no_grad_guard(const no_grad_guard&) = delete;
  no_grad_guard& operator=(const no_grad_guard&) = delete;

 private:
  bool previous_;
};

namespace detail {

template <class Real>
void require_finite(const std::vector<Real>& values, const char* op) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(static_cast<double>(values[i]))) {
      throw numeric_error(std::string(op) + " produced a non-finite value at index " +
                          std::to_string(i));
    }
  }
}

// Wraps a freshly computed value into a graph node. The backward closure is
// recorded only if some parent requires grad.
template <class Real>
basic_tensor<Real> make_result(const char* op, Shape shape, std::vector<Real> value,
                               std::initializer_list<basic_tensor<Real>> parents,
                               std::function<void(node<Real>&)> backward) {
  require_finite(value, op);
  auto n = std::make_shared<node<Real>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = op;
  bool needs = false;
  if (grad_recording())
    for (const auto& p : parents) needs = needs || p.requires_grad();
  if (needs) {
    n->requires_grad = true;
    for (const auto& p : parents) n->parents.push_back(p.node());
    n->backward = std::move(backward);
  }
  return basic_tensor<Real>(std::move(n));
}

// Adds `delta` into a parent's gradient if that parent takes part in the
// backward pass.
template <class Real>
std::vector<Real>* grad_sink(node<Real>& self, std::size_t parent) {
  node<Real>& p = *self.parents[parent];
  if (!p.requires_grad) return nullptr;
  p.ensure_grad();
  return &p.grad;
}

}  // namespace detail

}  // namespace bcnet
