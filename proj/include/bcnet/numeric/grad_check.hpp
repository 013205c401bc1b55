#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "bcnet/numeric/ops.hpp"

namespace bcnet {

// Relative error used by every gradient comparison in the project.
template <class Real>
Real relative_error(Real analytic, Real numeric) {
  return std::abs(analytic - numeric) / (std::abs(numeric) + Real(1e-8));
}

namespace detail {

// Fixed, non-degenerate weights that reduce a tensor-valued function to a
// scalar for checking. Irrational steps keep neighbouring weights distinct.
template <class Real>
std::vector<Real> projection_weights(std::size_t n) {
  std::vector<Real> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = Real(0.5) + Real(0.5) * static_cast<Real>(std::sin(1.0 + 0.7548776662466927 * static_cast<double>(i)));
  }
  return w;
}

}  // namespace detail

// Max over elements of |analytic - central difference| / (|cd| + 1e-8) for
// d(w . fn(x))/dx, where w is a fixed projection of fn's output.
template <class Real, class Fn>
Real grad_check(Fn&& fn, const basic_tensor<Real>& x, Real h = Real(1e-5)) {
  basic_tensor<Real> leaf = x.detach(true);
  basic_tensor<Real> out = fn(leaf);
  const auto weights = detail::projection_weights<Real>(out.size());
  const auto w = basic_tensor<Real>::from_values(out.shape(), weights);
  weighted_sum(out, w).backward();
  const std::vector<Real> analytic(leaf.grad().begin(), leaf.grad().end());

  Real worst(0);
  std::vector<Real> probe = x.to_vector();
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const Real saved = probe[i];
    probe[i] = saved + h;
    const auto up = fn(basic_tensor<Real>::from_values(x.shape(), probe)).to_vector();
    probe[i] = saved - h;
    const auto down = fn(basic_tensor<Real>::from_values(x.shape(), probe)).to_vector();
    probe[i] = saved;
    Real diff(0);
    for (std::size_t k = 0; k < up.size(); ++k) diff += weights[k] * (up[k] - down[k]);
    worst = std::max(worst, relative_error(analytic[i], diff / (Real(2) * h)));
  }
  return worst;
}

// Central-difference gradient of a scalar loss w.r.t. every element of every
// parameter. Parameters are perturbed in place and restored.
template <class Real>
std::vector<std::vector<Real>> numeric_gradient(const std::function<Real()>& loss,
                                                std::vector<basic_tensor<Real>>& params,
                                                Real h) {
  std::vector<std::vector<Real>> result;
  result.reserve(params.size());
  for (auto& p : params) {
    auto values = p.mutable_values();
    std::vector<Real> g(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      const Real saved = values[i];
      values[i] = saved + h;
      const Real up = loss();
      values[i] = saved - h;
      const Real down = loss();
      values[i] = saved;
      g[i] = (up - down) / (Real(2) * h);
    }
    result.push_back(std::move(g));
  }
  return result;
}

struct gradient_mismatch {
  double max_relative_error = 0.0;
  std::size_t parameter = 0;
  std::size_t element = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// Compares analytic gradients (one vector per parameter) with an oracle.
template <class A, class N>
gradient_mismatch compare_gradients(const std::vector<std::vector<A>>& analytic,
                                    const std::vector<std::vector<N>>& numeric) {
  if (analytic.size() != numeric.size()) {
    throw dimension_error("compare_gradients: parameter count mismatch");
  }
  gradient_mismatch report;
  for (std::size_t p = 0; p < analytic.size(); ++p) {
    if (analytic[p].size() != numeric[p].size()) {
      throw dimension_error("compare_gradients: size mismatch in parameter " +
                            std::to_string(p));
    }
    for (std::size_t i = 0; i < analytic[p].size(); ++i) {
      const double a = static_cast<double>(analytic[p][i]);
      const double n = static_cast<double>(numeric[p][i]);
      const double err = relative_error(a, n);
      ++report.checked;
      if (err >= report.max_relative_error) {
        report = {err, p, i, a, n, report.checked};
      }
    }
  }
  return report;
}

// Analytic gradient of `loss` w.r.t. `params` checked against central
// differences computed in the same precision.
template <class Real>
gradient_mismatch grad_check_parameters(const std::function<basic_tensor<Real>()>& loss,
                                        std::vector<basic_tensor<Real>>& params,
                                        Real h = Real(1e-5)) {
  for (auto& p : params) p.zero_grad();
  loss().backward();
  std::vector<std::vector<Real>> analytic;
  for (auto& p : params) {
    if (p.has_grad()) {
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    } else {
      analytic.emplace_back(p.size(), Real(0));
    }
  }
  auto numeric = numeric_gradient<Real>([&] { return loss().item(); }, params, h);
  return compare_gradients(analytic, numeric);
}

}  // namespace bcnet
