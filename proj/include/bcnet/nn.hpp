#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "bcnet/numeric/ops.hpp"
#include "bcnet/numeric/random.hpp"

// Parameter containers shared by the attention, ABI and BP modules.

namespace bcnet::nn {

template <class Real>
using named_tensor = std::pair<std::string, basic_tensor<Real>>;

template <class Real>
using parameter_list = std::vector<named_tensor<Real>>;

template <class Real>
basic_tensor<Real> uniform_parameter(Shape shape, double bound, rng& gen) {
  std::vector<Real> values(shape_size(shape));
  for (auto& v : values) v = static_cast<Real>(gen.uniform(-bound, bound));
  return basic_tensor<Real>::from_values(std::move(shape), std::move(values), true);
}

// Glorot-uniform weight for an in -> out projection.
template <class Real>
basic_tensor<Real> glorot(std::size_t in, std::size_t out, rng& gen) {
  return uniform_parameter<Real>({in, out}, std::sqrt(6.0 / static_cast<double>(in + out)),
                                 gen);
}

template <class Real>
struct linear {
  basic_tensor<Real> weight;  // [in x out]
  basic_tensor<Real> bias;    // [out]

  linear() = default;
  linear(std::size_t in, std::size_t out, rng& gen)
      : weight(glorot<Real>(in, out, gen)),
        bias(basic_tensor<Real>::zeros({out}, true)) {}

  std::size_t in_features() const { return weight.rows(); }
  std::size_t out_features() const { return weight.cols(); }

  basic_tensor<Real> operator()(const basic_tensor<Real>& x) const {
    return add_bias(matmul(x, weight), bias);
  }

  void collect(const std::string& prefix, parameter_list<Real>& out) const {
    out.emplace_back(prefix + ".weight", weight);
    out.emplace_back(prefix + ".bias", bias);
  }
};

template <class Real>
struct layer_norm_affine {
  basic_tensor<Real> gamma;
  basic_tensor<Real> beta;

  layer_norm_affine() = default;
  explicit layer_norm_affine(std::size_t n)
      : gamma(basic_tensor<Real>::filled({n}, Real(1), true)),
        beta(basic_tensor<Real>::zeros({n}, true)) {}

  basic_tensor<Real> operator()(const basic_tensor<Real>& x) const {
    return layer_norm(x, gamma, beta);
  }

  void collect(const std::string& prefix, parameter_list<Real>& out) const {
    out.emplace_back(prefix + ".gamma", gamma);
    out.emplace_back(prefix + ".beta", beta);
  }
};

// Linear layers joined by ReLU; the last layer is left linear.
template <class Real>
struct mlp {
  std::vector<linear<Real>> layers;

  mlp() = default;
  mlp(const std::vector<std::size_t>& widths, rng& gen) {
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      layers.emplace_back(widths[i], widths[i + 1], gen);
    }
  }

  basic_tensor<Real> operator()(basic_tensor<Real> x) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      x = layers[i](x);
      if (i + 1 < layers.size()) x = relu(x);
    }
    return x;
  }

  void collect(const std::string& prefix, parameter_list<Real>& out) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].collect(prefix + "." + std::to_string(i), out);
    }
  }
};

template <class Real>
std::size_t parameter_count(const parameter_list<Real>& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.size();
  return n;
}

// Copies values between two structurally identical parameter lists, possibly
// of different precision.
template <class From, class To>
void copy_parameters(const parameter_list<From>& from, parameter_list<To>& to) {
  if (from.size() != to.size()) {
    throw dimension_error("copy_parameters: parameter count mismatch");
  }
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (from[i].first != to[i].first || from[i].second.shape() != to[i].second.shape()) {
      throw dimension_error("copy_parameters: layout mismatch at " + from[i].first);
    }
    auto dst = to[i].second.mutable_values();
    auto src = from[i].second.values();
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] = static_cast<To>(src[k]);
  }
}

}  // namespace bcnet::nn
