#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "bcnet/numeric/tensor.hpp"

// Differentiable operators over basic_tensor. Every operator checks its
// operand shapes, computes the forward value eagerly, verifies that the
// result is finite and records a closure that accumulates gradients into
// its parents.

namespace bcnet {

namespace detail {

template <class Real>
using row_matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class Real>
Eigen::Map<const row_matrix<Real>> as_matrix(const std::vector<Real>& v, std::size_t rows,
                                             std::size_t cols) {
  return {v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

template <class Real>
Eigen::Map<row_matrix<Real>> as_matrix(std::vector<Real>& v, std::size_t rows,
                                       std::size_t cols) {
  return {v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

inline void require_rank(const Shape& shape, std::size_t rank, const char* op) {
  if (shape.size() != rank) {
    throw dimension_error(std::string(op) + " expects rank " + std::to_string(rank) +
                          ", got " + shape_string(shape));
  }
}

inline void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw dimension_error(std::string(op) + ": shape mismatch " + shape_string(a) +
                          " vs " + shape_string(b));
  }
}

// Elementwise unary op with derivative expressed through input and output.
template <class Real, class Forward, class Derivative>
basic_tensor<Real> unary(const char* op, const basic_tensor<Real>& x, Forward f,
                         Derivative df) {
  const auto in = x.values();
  std::vector<Real> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_result<Real>(op, x.shape(), std::move(out), {x}, [df](node<Real>& self) {
    if (auto* g = grad_sink(self, 0)) {
      const auto& xin = self.parents[0]->value;
      for (std::size_t i = 0; i < xin.size(); ++i) {
        (*g)[i] += self.grad[i] * df(xin[i], self.value[i]);
      }
    }
  });
}

}  // namespace detail

template <class Real>
basic_tensor<Real> matmul(const basic_tensor<Real>& a, const basic_tensor<Real>& b) {
  detail::require_rank(a.shape(), 2, "matmul");
  detail::require_rank(b.shape(), 2, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw dimension_error("matmul: inner dimensions differ, " + shape_string(a.shape()) +
                          " x " + shape_string(b.shape()));
  }
  std::vector<Real> out(m * n);
  {
    const auto& av = a.node()->value;
    const auto& bv = b.node()->value;
    detail::as_matrix(out, m, n).noalias() =
        detail::as_matrix(av, m, k) * detail::as_matrix(bv, k, n);
  }
  return detail::make_result<Real>(
      "matmul", {m, n}, std::move(out), {a, b}, [m, k, n](detail::node<Real>& self) {
        const auto dc = detail::as_matrix(std::as_const(self.grad), m, n);
        if (auto* ga = detail::grad_sink(self, 0)) {
          detail::as_matrix(*ga, m, k).noalias() +=
              dc * detail::as_matrix(std::as_const(self.parents[1]->value), k, n).transpose();
        }
        if (auto* gb = detail::grad_sink(self, 1)) {
          detail::as_matrix(*gb, k, n).noalias() +=
              detail::as_matrix(std::as_const(self.parents[0]->value), m, k).transpose() * dc;
        }
      });
}

template <class Real>
basic_tensor<Real> transpose(const basic_tensor<Real>& x) {
  detail::require_rank(x.shape(), 2, "transpose");
  const std::size_t m = x.rows(), n = x.cols();
  const auto in = x.values();
  std::vector<Real> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = in[i * n + j];
  return detail::make_result<Real>("transpose", {n, m}, std::move(out), {x},
                                   [m, n](detail::node<Real>& self) {
                                     if (auto* g = detail::grad_sink(self, 0)) {
                                       for (std::size_t i = 0; i < m; ++i)
                                         for (std::size_t j = 0; j < n; ++j)
                                           (*g)[i * n + j] += self.grad[j * m + i];
                                     }
                                   });
}

template <class Real>
basic_tensor<Real> add(const basic_tensor<Real>& a, const basic_tensor<Real>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "add");
  const auto av = a.values(), bv = b.values();
  std::vector<Real> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return detail::make_result<Real>("add", a.shape(), std::move(out), {a, b},
                                   [](detail::node<Real>& self) {
                                     for (std::size_t p = 0; p < 2; ++p) {
                                       if (auto* g = detail::grad_sink(self, p)) {
                                         for (std::size_t i = 0; i < g->size(); ++i)
                                           (*g)[i] += self.grad[i];
                                       }
                                     }
                                   });
}

template <class Real>
basic_tensor<Real> sub(const basic_tensor<Real>& a, const basic_tensor<Real>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "sub");
  const auto av = a.values(), bv = b.values();
  std::vector<Real> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return detail::make_result<Real>("sub", a.shape(), std::move(out), {a, b},
                                   [](detail::node<Real>& self) {
                                     if (auto* g = detail::grad_sink(self, 0))
                                       for (std::size_t i = 0; i < g->size(); ++i)
                                         (*g)[i] += self.grad[i];
                                     if (auto* g = detail::grad_sink(self, 1))
                                       for (std::size_t i = 0; i < g->size(); ++i)
                                         (*g)[i] -= self.grad[i];
                                   });
}

// Hadamard product.
template <class Real>
basic_tensor<Real> mul(const basic_tensor<Real>& a, const basic_tensor<Real>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "mul");
  const auto av = a.values(), bv = b.values();
  std::vector<Real> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return detail::make_result<Real>("mul", a.shape(), std::move(out), {a, b},
                                   [](detail::node<Real>& self) {
                                     const auto& av = self.parents[0]->value;
                                     const auto& bv = self.parents[1]->value;
                                     if (auto* g = detail::grad_sink(self, 0))
                                       for (std::size_t i = 0; i < g->size(); ++i)
                                         (*g)[i] += self.grad[i] * bv[i];
                                     if (auto* g = detail::grad_sink(self, 1))
                                       for (std::size_t i = 0; i < g->size(); ++i)
                                         (*g)[i] += self.grad[i] * av[i];
                                   });
}

// scale * x + shift, elementwise.
template <class Real>
basic_tensor<Real> affine(const basic_tensor<Real>& x, Real scale, Real shift = Real(0)) {
  return detail::unary(
      "affine", x, [scale, shift](Real v) { return scale * v + shift; },
      [scale](Real, Real) { return scale; });
}

template <class Real>
basic_tensor<Real> scale(const basic_tensor<Real>& x, Real factor) {
  return affine(x, factor, Real(0));
}

// x[m x n] + bias[n] broadcast over rows.
template <class Real>
basic_tensor<Real> add_bias(const basic_tensor<Real>& x, const basic_tensor<Real>& bias) {
  detail::require_rank(x.shape(), 2, "add_bias");
  detail::require_rank(bias.shape(), 1, "add_bias");
  const std::size_t m = x.rows(), n = x.cols();
  if (bias.size() != n) {
    throw dimension_error("add_bias: bias " + shape_string(bias.shape()) +
                          " does not match " + shape_string(x.shape()));
  }
  const auto xv = x.values(), bv = bias.values();
  std::vector<Real> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] + bv[j];
  return detail::make_result<Real>("add_bias", x.shape(), std::move(out), {x, bias},
                                   [m, n](detail::node<Real>& self) {
                                     if (auto* g = detail::grad_sink(self, 0))
                                       for (std::size_t i = 0; i < m * n; ++i)
                                         (*g)[i] += self.grad[i];
                                     if (auto* g = detail::grad_sink(self, 1))
                                       for (std::size_t i = 0; i < m; ++i)
                                         for (std::size_t j = 0; j < n; ++j)
                                           (*g)[j] += self.grad[i * n + j];
                                   });
}

// x[m x n] with row i scaled by s[i].
template <class Real>
basic_tensor<Real> mul_rows(const basic_tensor<Real>& x, const basic_tensor<Real>& s) {
  detail::require_rank(x.shape(), 2, "mul_rows");
  detail::require_rank(s.shape(), 1, "mul_rows");
  const std::size_t m = x.rows(), n = x.cols();
  if (s.size() != m) {
    throw dimension_error("mul_rows: scale " + shape_string(s.shape()) +
                          " does not match " + shape_string(x.shape()));
  }
  const auto xv = x.values(), sv = s.values();
  std::vector<Real> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] * sv[i];
  return detail::make_result<Real>(
      "mul_rows", x.shape(), std::move(out), {x, s}, [m, n](detail::node<Real>& self) {
        const auto& xv = self.parents[0]->value;
        const auto& sv = self.parents[1]->value;
        if (auto* g = detail::grad_sink(self, 0))
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) (*g)[i * n + j] += self.grad[i * n + j] * sv[i];
        if (auto* g = detail::grad_sink(self, 1))
          for (std::size_t i = 0; i < m; ++i) {
            Real acc(0);
            for (std::size_t j = 0; j < n; ++j) acc += self.grad[i * n + j] * xv[i * n + j];
            (*g)[i] += acc;
          }
      });
}

// Row-wise softmax of scale * x, stabilized by subtracting the row maximum.
template <class Real>
basic_tensor<Real> softmax_rows(const basic_tensor<Real>& x, Real scale = Real(1)) {
  detail::require_rank(x.shape(), 2, "softmax_rows");
  detail::require_finite(x.node()->value, "softmax_rows input");
  const std::size_t m = x.rows(), n = x.cols();
  const auto xv = x.values();
  std::vector<Real> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const Real* row = xv.data() + i * n;
    Real* dst = out.data() + i * n;
    Real peak = -std::numeric_limits<Real>::infinity();
    for (std::size_t j = 0; j < n; ++j) peak = std::max(peak, scale * row[j]);
    Real total(0);
    for (std::size_t j = 0; j < n; ++j) {
      dst[j] = std::exp(scale * row[j] - peak);
      total += dst[j];
    }
    for (std::size_t j = 0; j < n; ++j) dst[j] /= total;
  }
  return detail::make_result<Real>(
      "softmax_rows", x.shape(), std::move(out), {x}, [m, n, scale](detail::node<Real>& self) {
        if (auto* g = detail::grad_sink(self, 0)) {
          for (std::size_t i = 0; i < m; ++i) {
            const Real* y = self.value.data() + i * n;
            const Real* dy = self.grad.data() + i * n;
            Real dot(0);
            for (std::size_t j = 0; j < n; ++j) dot += dy[j] * y[j];
            for (std::size_t j = 0; j < n; ++j) (*g)[i * n + j] += scale * y[j] * (dy[j] - dot);
          }
        }
      });
}

inline constexpr double kLayerNormEpsilon = 1e-5;

// Per-row normalization to zero mean and unit variance followed by an affine
// map. A constant row normalizes to zero and therefore yields beta.
template <class Real>
basic_tensor<Real> layer_norm(const basic_tensor<Real>& x, const basic_tensor<Real>& gamma,
                              const basic_tensor<Real>& beta) {
  detail::require_rank(x.shape(), 2, "layer_norm");
  const std::size_t m = x.rows(), n = x.cols();
  if (gamma.shape() != Shape{n} || beta.shape() != Shape{n}) {
    throw dimension_error("layer_norm: affine parameters must have shape [" +
                          std::to_string(n) + "]");
  }
  const auto xv = x.values(), gv = gamma.values(), bv = beta.values();
  std::vector<Real> out(m * n);
  // Normalized values and inverse deviations are kept for the backward pass.
  std::vector<Real> xhat(m * n), inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Real* row = xv.data() + i * n;
    Real mean(0);
    for (std::size_t j = 0; j < n; ++j) mean += row[j];
    mean /= Real(n);
    Real var(0);
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= Real(n);
    inv_std[i] = Real(1) / std::sqrt(var + Real(kLayerNormEpsilon));
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (row[j] - mean) * inv_std[i];
      out[i * n + j] = gv[j] * xhat[i * n + j] + bv[j];
    }
  }
  return detail::make_result<Real>(
      "layer_norm", x.shape(), std::move(out), {x, gamma, beta},
      [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::node<Real>& self) {
        const auto& gv = self.parents[1]->value;
        if (auto* g = detail::grad_sink(self, 0)) {
          for (std::size_t i = 0; i < m; ++i) {
            Real mean_d(0), mean_dx(0);
            for (std::size_t j = 0; j < n; ++j) {
              const Real d = self.grad[i * n + j] * gv[j];
              mean_d += d;
              mean_dx += d * xhat[i * n + j];
            }
            mean_d /= Real(n);
            mean_dx /= Real(n);
            for (std::size_t j = 0; j < n; ++j) {
              const Real d = self.grad[i * n + j] * gv[j];
              (*g)[i * n + j] += inv_std[i] * (d - mean_d - xhat[i * n + j] * mean_dx);
            }
          }
        }
        if (auto* g = detail::grad_sink(self, 1))
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
              (*g)[j] += self.grad[i * n + j] * xhat[i * n + j];
        if (auto* g = detail::grad_sink(self, 2))
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) (*g)[j] += self.grad[i * n + j];
      });
}

template <class Real>
basic_tensor<Real> relu(const basic_tensor<Real>& x) {
  return detail::unary(
      "relu", x, [](Real v) { return v > Real(0) ? v : Real(0); },
      [](Real v, Real) { return v > Real(0) ? Real(1) : Real(0); });
}

template <class Real>
basic_tensor<Real> sigmoid(const basic_tensor<Real>& x) {
  return detail::unary(
      "sigmoid", x,
      [](Real v) {
        if (v >= Real(0)) return Real(1) / (Real(1) + std::exp(-v));
        const Real e = std::exp(v);
        return e / (Real(1) + e);
      },
      [](Real, Real y) { return y * (Real(1) - y); });
}

template <class Real>
basic_tensor<Real> log(const basic_tensor<Real>& x) {
  return detail::unary(
      "log", x, [](Real v) { return std::log(v); }, [](Real v, Real) { return Real(1) / v; });
}

// Clamps into [lo, hi]; the gradient is zero where the bound is active.
template <class Real>
basic_tensor<Real> clamp(const basic_tensor<Real>& x, Real lo, Real hi) {
  return detail::unary(
      "clamp", x, [lo, hi](Real v) { return std::clamp(v, lo, hi); },
      [lo, hi](Real v, Real) { return (v < lo || v > hi) ? Real(0) : Real(1); });
}

// Elementwise Huber with unit transition: 0.5 d^2 for |d| < 1, |d| - 0.5 beyond.
template <class Real>
basic_tensor<Real> smooth_l1(const basic_tensor<Real>& d) {
  return detail::unary(
      "smooth_l1", d,
      [](Real v) {
        const Real a = std::abs(v);
        return a < Real(1) ? Real(0.5) * v * v : a - Real(0.5);
      },
      [](Real v, Real) {
        if (std::abs(v) < Real(1)) return v;
        return v > Real(0) ? Real(1) : Real(-1);
      });
}

// Main diagonal of a square matrix.
template <class Real>
basic_tensor<Real> diagonal(const basic_tensor<Real>& x) {
  detail::require_rank(x.shape(), 2, "diagonal");
  const std::size_t n = x.rows();
  if (x.cols() != n) {
    throw dimension_error("diagonal of non-square " + shape_string(x.shape()));
  }
  const auto xv = x.values();
  std::vector<Real> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = xv[i * n + i];
  return detail::make_result<Real>("diagonal", {n}, std::move(out), {x},
                                   [n](detail::node<Real>& self) {
                                     if (auto* g = detail::grad_sink(self, 0))
                                       for (std::size_t i = 0; i < n; ++i)
                                         (*g)[i * n + i] += self.grad[i];
                                   });
}

// s / max(s) for a strictly positive vector. The maximum is attributed to its
// first occurrence in the backward pass.
template <class Real>
basic_tensor<Real> normalize_by_max(const basic_tensor<Real>& s) {
  detail::require_rank(s.shape(), 1, "normalize_by_max");
  const auto sv = s.values();
  if (sv.empty()) throw dimension_error("normalize_by_max of an empty vector");
  const std::size_t arg = static_cast<std::size_t>(
      std::max_element(sv.begin(), sv.end()) - sv.begin());
  const Real peak = sv[arg];
  if (!(peak > Real(0))) {
    throw numeric_error("normalize_by_max requires a positive maximum");
  }
  std::vector<Real> out(sv.size());
  for (std::size_t i = 0; i < sv.size(); ++i) out[i] = sv[i] / peak;
  return detail::make_result<Real>(
      "normalize_by_max", s.shape(), std::move(out), {s}, [arg, peak](detail::node<Real>& self) {
        if (auto* g = detail::grad_sink(self, 0)) {
          const auto& sv = self.parents[0]->value;
          Real cross(0);
          for (std::size_t i = 0; i < sv.size(); ++i) {
            (*g)[i] += self.grad[i] / peak;
            cross += self.grad[i] * sv[i];
          }
          (*g)[arg] -= cross / (peak * peak);
        }
      });
}

// Same values under a new shape of equal size (row-major order is kept).
template <class Real>
basic_tensor<Real> reshape(const basic_tensor<Real>& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw dimension_error("reshape " + shape_string(x.shape()) + " -> " +
                          shape_string(shape));
  }
  if (shape.size() > 3) throw dimension_error("reshape beyond rank 3");
  return detail::make_result<Real>("reshape", std::move(shape), x.to_vector(), {x},
                                   [](detail::node<Real>& self) {
                                     if (auto* g = detail::grad_sink(self, 0))
                                       for (std::size_t i = 0; i < g->size(); ++i)
                                         (*g)[i] += self.grad[i];
                                   });
}

// Column j of x[m x n] as a vector of length m.
template <class Real>
basic_tensor<Real> column(const basic_tensor<Real>& x, std::size_t j) {
  detail::require_rank(x.shape(), 2, "column");
  const std::size_t m = x.rows(), n = x.cols();
  if (j >= n) {
    throw dimension_error("column " + std::to_string(j) + " out of range for " +
                          shape_string(x.shape()));
  }
  const auto xv = x.values();
  std::vector<Real> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = xv[i * n + j];
  return detail::make_result<Real>("column", {m}, std::move(out), {x},
                                   [m, n, j](detail::node<Real>& self) {
                                     if (auto* g = detail::grad_sink(self, 0))
                                       for (std::size_t i = 0; i < m; ++i)
                                         (*g)[i * n + j] += self.grad[i];
                                   });
}

template <class Real>
basic_tensor<Real> sum(const basic_tensor<Real>& x) {
  const auto xv = x.values();
  Real total(0);
  for (Real v : xv) total += v;
  return detail::make_result<Real>("sum", {}, {total}, {x}, [](detail::node<Real>& self) {
    if (auto* g = detail::grad_sink(self, 0))
      for (auto& v : *g) v += self.grad[0];
  });
}

template <class Real>
basic_tensor<Real> mean(const basic_tensor<Real>& x) {
  if (x.size() == 0) throw contract_error("mean of an empty tensor");
  return scale(sum(x), Real(1) / Real(x.size()));
}

// Sum of x weighted elementwise by a constant tensor of the same shape.
template <class Real>
basic_tensor<Real> weighted_sum(const basic_tensor<Real>& x, const basic_tensor<Real>& w) {
  return sum(mul(x, w));
}

}  // namespace bcnet
