#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "bcnet/nn.hpp"

// Single-head attention units without positional encoding: self-attention,
// cross-attention (with the per-position originality score) and
// difference-attention between an action and a background stream.

namespace bcnet {

template <class Real>
struct attention_params {
  basic_tensor<Real> wq, wk, wv, wo;  // [C x C]; wo is the output projection
  nn::mlp<Real> ffn;                  // C -> hidden -> C
  nn::layer_norm_affine<Real> ln1, ln2;

  attention_params() = default;
  attention_params(std::size_t dim, std::size_t ffn_hidden, rng& gen)
      : wq(nn::glorot<Real>(dim, dim, gen)),
        wk(nn::glorot<Real>(dim, dim, gen)),
        wv(nn::glorot<Real>(dim, dim, gen)),
        wo(nn::glorot<Real>(dim, dim, gen)),
        ffn({dim, ffn_hidden, dim}, gen),
        ln1(dim),
        ln2(dim) {}

  std::size_t dim() const { return wq.rows(); }

  void collect(const std::string& prefix, nn::parameter_list<Real>& out) const {
    out.emplace_back(prefix + ".wq", wq);
    out.emplace_back(prefix + ".wk", wk);
    out.emplace_back(prefix + ".wv", wv);
    out.emplace_back(prefix + ".wo", wo);
    ffn.collect(prefix + ".ffn", out);
    ln1.collect(prefix + ".ln1", out);
    ln2.collect(prefix + ".ln2", out);
  }
};

// Query/key projections only, for units whose output is the map itself.
template <class Real>
struct attention_map_params {
  basic_tensor<Real> wq, wk;

  attention_map_params() = default;
  attention_map_params(std::size_t dim, rng& gen)
      : wq(nn::glorot<Real>(dim, dim, gen)), wk(nn::glorot<Real>(dim, dim, gen)) {}

  void collect(const std::string& prefix, nn::parameter_list<Real>& out) const {
    out.emplace_back(prefix + ".wq", wq);
    out.emplace_back(prefix + ".wk", wk);
  }
};

inline std::size_t ffn_width(std::size_t dim, double ratio) {
  const auto w = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(dim)));
  return w == 0 ? 1 : w;
}

namespace detail {

// Re-labels numeric failures with the sub-layer they came from.
template <class F>
auto in_sublayer(const char* unit, const char* sublayer, F&& f) {
  try {
    return f();
  } catch (const numeric_error& e) {
    throw numeric_error(std::string(unit) + "/" + sublayer + ": " + e.what());
  }
}

template <class Real>
void require_dim(const basic_tensor<Real>& x, std::size_t dim, const char* unit) {
  if (x.rank() != 2 || x.cols() != dim) {
    throw dimension_error(std::string(unit) + ": expected [n x " + std::to_string(dim) +
                          "] input, got " + shape_string(x.shape()));
  }
  if (x.rows() == 0) throw dimension_error(std::string(unit) + ": empty sequence");
}

// Residual + LayerNorm around the attention output, then around the FFN.
template <class Real>
basic_tensor<Real> residual_block(const basic_tensor<Real>& attended,
                                  const basic_tensor<Real>& input,
                                  const basic_tensor<Real>& wo,
                                  const nn::mlp<Real>& ffn,
                                  const nn::layer_norm_affine<Real>& ln1,
                                  const nn::layer_norm_affine<Real>& ln2, const char* unit) {
  auto projected = in_sublayer(unit, "projection", [&] { return matmul(attended, wo); });
  auto first = in_sublayer(unit, "norm1", [&] { return ln1(add(projected, input)); });
  auto ff = in_sublayer(unit, "ffn", [&] { return ffn(first); });
  return in_sublayer(unit, "norm2", [&] { return ln2(add(first, ff)); });
}

}  // namespace detail

// softmax(Q K^T / sqrt(C)) with Q = queries * wq and K = keys * wk.
template <class Real>
basic_tensor<Real> attention_map(const basic_tensor<Real>& queries,
                                 const basic_tensor<Real>& keys, const basic_tensor<Real>& wq,
                                 const basic_tensor<Real>& wk) {
  const std::size_t c = wq.rows();
  auto q = matmul(queries, wq);
  auto k = matmul(keys, wk);
  return softmax_rows(matmul(q, transpose(k)),
                      Real(1) / std::sqrt(static_cast<Real>(c)));
}

template <class Real>
basic_tensor<Real> self_attention_unit(const basic_tensor<Real>& x,
                                       const attention_params<Real>& p) {
  constexpr const char* unit = "self-attention";
  detail::require_dim(x, p.dim(), unit);
  auto map = detail::in_sublayer(unit, "attention map",
                                 [&] { return attention_map(x, x, p.wq, p.wk); });
  auto attended = detail::in_sublayer(unit, "aggregation",
                                      [&] { return matmul(map, matmul(x, p.wv)); });
  return detail::residual_block(attended, x, p.wo, p.ffn, p.ln1, p.ln2, unit);
}

template <class Real>
struct cross_attention_result {
  basic_tensor<Real> output;       // [T x C]
  basic_tensor<Real> originality;  // [T], diagonal of the cross map
  basic_tensor<Real> map;          // [T x T]
};

// Per-position similarity of `a` to `b` at the same position: the diagonal of
// softmax(Q_a K_b^T / sqrt(C)).
template <class Real>
basic_tensor<Real> originality_scores(const basic_tensor<Real>& a, const basic_tensor<Real>& b,
                                      const basic_tensor<Real>& wq,
                                      const basic_tensor<Real>& wk) {
  if (a.rank() != 2 || b.rank() != 2 || a.rows() != b.rows()) {
    throw dimension_error("cross-attention: sequence lengths differ, " +
                          shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  return diagonal(attention_map(a, b, wq, wk));
}

template <class Real>
cross_attention_result<Real> cross_attention_unit(const basic_tensor<Real>& a,
                                                  const basic_tensor<Real>& b,
                                                  const attention_params<Real>& p) {
  constexpr const char* unit = "cross-attention";
  detail::require_dim(a, p.dim(), unit);
  detail::require_dim(b, p.dim(), unit);
  if (a.rows() != b.rows()) {
    throw dimension_error("cross-attention: sequence lengths differ, " +
                          shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  auto map = detail::in_sublayer(unit, "attention map",
                                 [&] { return attention_map(a, b, p.wq, p.wk); });
  auto attended = detail::in_sublayer(unit, "aggregation",
                                      [&] { return matmul(map, matmul(b, p.wv)); });
  auto out = detail::residual_block(attended, a, p.wo, p.ffn, p.ln1, p.ln2, unit);
  return {std::move(out), diagonal(map), std::move(map)};
}

template <class Real>
struct difference_attention_result {
  basic_tensor<Real> action;      // [m x C]
  basic_tensor<Real> background;  // [n x C]
  basic_tensor<Real> map;         // [m x n], rows are action positions
};

// The difference map A = softmax(Q_a K_b^T / sqrt(C)) reweights background
// values for the action stream and, transposed, action values for the
// background stream. Both streams share the projections.
template <class Real>
difference_attention_result<Real> difference_attention_unit(const basic_tensor<Real>& fa,
                                                            const basic_tensor<Real>& fb,
                                                            const attention_params<Real>& p) {
  constexpr const char* unit = "difference-attention";
  detail::require_dim(fa, p.dim(), unit);
  detail::require_dim(fb, p.dim(), unit);
  auto map = detail::in_sublayer(unit, "difference map",
                                 [&] { return attention_map(fa, fb, p.wq, p.wk); });
  auto to_action = detail::in_sublayer(unit, "aggregation",
                                       [&] { return matmul(map, matmul(fb, p.wv)); });
  auto to_background = detail::in_sublayer(
      unit, "aggregation", [&] { return matmul(transpose(map), matmul(fa, p.wv)); });
  auto a_out = detail::residual_block(to_action, fa, p.wo, p.ffn, p.ln1, p.ln2, unit);
  auto b_out = detail::residual_block(to_background, fb, p.wo, p.ffn, p.ln1, p.ln2, unit);
  return {std::move(a_out), std::move(b_out), std::move(map)};
}

}  // namespace bcnet
