#pragma once

#include <algorithm>
#include <string>

#include "bcnet/anchors.hpp"
#include "bcnet/attention.hpp"

// Action-Background Interaction. The frame level splits the self-attended
// sequence into action and background streams and scores every step; the
// clip level pools both streams over the anchor grid and scores every anchor.

namespace bcnet {

// Scoring head: MLP to one logit per row followed by a sigmoid.
template <class Real>
basic_tensor<Real> score_head(const nn::mlp<Real>& head, const basic_tensor<Real>& x) {
  auto logits = head(x);
  return sigmoid(reshape(logits, {logits.rows()}));
}

template <class Real>
struct frame_params {
  attention_params<Real> self_attention;
  nn::linear<Real> to_action, to_background;
  attention_params<Real> difference;
  nn::mlp<Real> action_head, background_head;

  frame_params() = default;
  frame_params(std::size_t dim, double ffn_ratio, rng& gen)
      : self_attention(dim, ffn_width(dim, ffn_ratio), gen),
        to_action(dim, dim, gen),
        to_background(dim, dim, gen),
        difference(dim, ffn_width(dim, ffn_ratio), gen),
        action_head({dim, std::max<std::size_t>(1, dim / 2), 1}, gen),
        background_head({dim, std::max<std::size_t>(1, dim / 2), 1}, gen) {}

  void collect(const std::string& prefix, nn::parameter_list<Real>& out) const {
    self_attention.collect(prefix + ".self", out);
    to_action.collect(prefix + ".to_action", out);
    to_background.collect(prefix + ".to_background", out);
    difference.collect(prefix + ".difference", out);
    action_head.collect(prefix + ".action_head", out);
    background_head.collect(prefix + ".background_head", out);
  }
};

template <class Real>
struct frame_outputs {
  basic_tensor<Real> action_features;      // F_a' [T x C]
  basic_tensor<Real> background_features;  // F_b' [T x C]
  basic_tensor<Real> action;               // P_a^f [T]
  basic_tensor<Real> background;           // P_b^f [T]
};

template <class Real>
frame_outputs<Real> frame_level_interaction(const basic_tensor<Real>& features,
                                            const frame_params<Real>& p) {
  auto enhanced = self_attention_unit(features, p.self_attention);
  auto fa = p.to_action(enhanced);
  auto fb = p.to_background(enhanced);
  auto diff = difference_attention_unit(fa, fb, p.difference);
  auto pa = score_head(p.action_head, diff.action);
  auto pb = score_head(p.background_head, diff.background);
  return {std::move(diff.action), std::move(diff.background), std::move(pa), std::move(pb)};
}

// Pools [T x C] features into one row of N * C values per anchor.
template <class Real>
basic_tensor<Real> sample_anchor_features(const basic_tensor<Real>& features,
                                          const anchor_grid& grid) {
  if (features.rank() != 2 || features.rows() != grid.length) {
    throw dimension_error("sample_anchor_features: grid built for length " +
                          std::to_string(grid.length) + ", features are " +
                          shape_string(features.shape()));
  }
  auto pooled = matmul(grid.sampling_matrix<Real>(), features);
  return reshape(pooled, {grid.size(), grid.samples * features.cols()});
}

template <class Real>
struct clip_params {
  attention_params<Real> action_self, background_self;
  attention_params<Real> difference;
  nn::mlp<Real> classification_head, regression_head, background_head;

  clip_params() = default;
  clip_params(std::size_t anchor_dim, double ffn_ratio, rng& gen)
      : action_self(anchor_dim, ffn_width(anchor_dim, ffn_ratio), gen),
        background_self(anchor_dim, ffn_width(anchor_dim, ffn_ratio), gen),
        difference(anchor_dim, ffn_width(anchor_dim, ffn_ratio), gen),
        classification_head({anchor_dim, head_width(anchor_dim), 1}, gen),
        regression_head({anchor_dim, head_width(anchor_dim), 1}, gen),
        background_head({anchor_dim, head_width(anchor_dim), 1}, gen) {}

  static std::size_t head_width(std::size_t dim) { return std::max<std::size_t>(2, dim / 4); }

  void collect(const std::string& prefix, nn::parameter_list<Real>& out) const {
    action_self.collect(prefix + ".action_self", out);
    background_self.collect(prefix + ".background_self", out);
    difference.collect(prefix + ".difference", out);
    classification_head.collect(prefix + ".classification_head", out);
    regression_head.collect(prefix + ".regression_head", out);
    background_head.collect(prefix + ".background_head", out);
  }
};

template <class Real>
struct clip_outputs {
  basic_tensor<Real> action_classification;  // [L]
  basic_tensor<Real> action_regression;      // [L]
  basic_tensor<Real> background;             // [L]
};

template <class Real>
clip_outputs<Real> clip_level_interaction(const basic_tensor<Real>& action_anchors,
                                          const basic_tensor<Real>& background_anchors,
                                          const clip_params<Real>& p) {
  if (action_anchors.rank() != 2 || background_anchors.rank() != 2 ||
      action_anchors.rows() != background_anchors.rows()) {
    throw dimension_error("clip_level_interaction: anchor sequences differ, " +
                          shape_string(action_anchors.shape()) + " vs " +
                          shape_string(background_anchors.shape()));
  }
  auto fa = self_attention_unit(action_anchors, p.action_self);
  auto fb = self_attention_unit(background_anchors, p.background_self);
  auto diff = difference_attention_unit(fa, fb, p.difference);
  return {score_head(p.classification_head, diff.action),
          score_head(p.regression_head, diff.action),
          score_head(p.background_head, diff.background)};
}

template <class Real>
struct abi_outputs {
  frame_outputs<Real> frame;
  clip_outputs<Real> clip;
};

template <class Real>
abi_outputs<Real> abi_forward(const basic_tensor<Real>& features, const anchor_grid& grid,
                              const frame_params<Real>& frame, const clip_params<Real>& clip) {
  auto f = frame_level_interaction(features, frame);
  auto action_anchors = sample_anchor_features(f.action_features, grid);
  auto background_anchors = sample_anchor_features(f.background_features, grid);
  auto c = clip_level_interaction(action_anchors, background_anchors, clip);
  return {std::move(f), std::move(c)};
}

}  // namespace bcnet
