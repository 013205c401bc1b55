#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "bcnet/attention.hpp"

// Boundary Prediction: a stack of layers that re-attend to the original
// sequence at every depth and keep features in proportion to how similar they
// remain to it (their originality), ending in start/end probability heads.

namespace bcnet {

template <class Real>
struct bp_layer_params {
  attention_params<Real> layer_self;     // over the running features F_i
  attention_params<Real> original_self;  // over the original features F_o
  attention_map_params<Real> cross;      // originality map between the two

  bp_layer_params() = default;
  bp_layer_params(std::size_t dim, double ffn_ratio, rng& gen)
      : layer_self(dim, ffn_width(dim, ffn_ratio), gen),
        original_self(dim, ffn_width(dim, ffn_ratio), gen),
        cross(dim, gen) {}

  void collect(const std::string& prefix, nn::parameter_list<Real>& out) const {
    layer_self.collect(prefix + ".layer_self", out);
    original_self.collect(prefix + ".original_self", out);
    cross.collect(prefix + ".cross", out);
  }
};

template <class Real>
struct bp_stack {
  std::vector<bp_layer_params<Real>> layers;
  nn::mlp<Real> head;  // C -> C/2 -> 2
  // Fraction of steps kept by hard top-k gating; 1 selects soft gating.
  double keep_ratio = 1.0;

  bp_stack() = default;
  bp_stack(std::size_t dim, std::size_t depth, double ffn_ratio, double keep, rng& gen)
      : keep_ratio(keep) {
    for (std::size_t i = 0; i < depth; ++i) layers.emplace_back(dim, ffn_ratio, gen);
    head = nn::mlp<Real>({dim, std::max<std::size_t>(1, dim / 2), 2}, gen);
  }

  void collect(const std::string& prefix, nn::parameter_list<Real>& out) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].collect(prefix + ".layer" + std::to_string(i), out);
    }
    head.collect(prefix + ".head", out);
  }
};

namespace detail {

// Constant 0/1 mask selecting the ceil(keep * T) highest scores (ties to the
// earlier step).
template <class Real>
basic_tensor<Real> top_k_mask(const basic_tensor<Real>& scores, double keep) {
  const auto s = scores.values();
  const std::size_t n = s.size();
  const auto k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(keep * static_cast<double>(n))), 1, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  std::vector<Real> mask(n, Real(0));
  for (std::size_t i = 0; i < k; ++i) mask[order[i]] = Real(1);
  return basic_tensor<Real>::vector(std::move(mask));
}

}  // namespace detail

// F_{i+1} = SA(F_i) * gate + F_i, where the gate is the originality of
// SA(F_i) against SA(F_o) normalized by its maximum.
template <class Real>
basic_tensor<Real> bp_layer(const basic_tensor<Real>& layer_input,
                            const basic_tensor<Real>& original, const bp_layer_params<Real>& p,
                            double keep_ratio = 1.0) {
  if (layer_input.shape() != original.shape()) {
    throw dimension_error("bp_layer: inputs differ, " + shape_string(layer_input.shape()) +
                          " vs " + shape_string(original.shape()));
  }
  auto layer_global = self_attention_unit(layer_input, p.layer_self);
  auto original_global = self_attention_unit(original, p.original_self);
  auto originality = detail::in_sublayer("bp-layer", "originality", [&] {
    return originality_scores(layer_global, original_global, p.cross.wq, p.cross.wk);
  });
  basic_tensor<Real> gate = keep_ratio < 1.0 ? detail::top_k_mask(originality, keep_ratio)
                                             : normalize_by_max(originality);
  return add(mul_rows(layer_global, gate), layer_input);
}

template <class Real>
struct boundary_outputs {
  basic_tensor<Real> start;  // P_s [T]
  basic_tensor<Real> end;    // P_e [T]
};

template <class Real>
boundary_outputs<Real> bp_forward(const basic_tensor<Real>& original, const bp_stack<Real>& stack) {
  basic_tensor<Real> features = original;
  for (const auto& layer : stack.layers) {
    features = bp_layer(features, original, layer, stack.keep_ratio);
  }
  auto probs = sigmoid(stack.head(features));
  return {column(probs, 0), column(probs, 1)};
}

}  // namespace bcnet
