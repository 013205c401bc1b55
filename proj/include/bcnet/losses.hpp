#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "bcnet/labels.hpp"
#include "bcnet/model.hpp"
#include "bcnet/numeric/random.hpp"

namespace bcnet {

inline constexpr double kProbabilityFloor = 1e-6;
inline constexpr double kRegressionPositive = 0.3;

namespace detail {

inline std::vector<double> full_mask(std::size_t n, const std::vector<double>& mask) {
  return mask.empty() ? std::vector<double>(n, 1.0) : mask;
}

template <class Real>
basic_tensor<Real> zero_loss(const basic_tensor<Real>& pred) {
  return scale(sum(pred), Real(0));
}

template <class Real>
void require_targets(const basic_tensor<Real>& pred, const std::vector<double>& target,
                     const std::vector<double>& mask, const char* loss) {
  if (pred.rank() != 1 || pred.size() != target.size() || mask.size() != target.size()) {
    throw dimension_error(std::string(loss) + ": prediction " + shape_string(pred.shape()) +
                          " vs " + std::to_string(target.size()) + " targets");
  }
}

}  // namespace detail

// Class-balanced binary logistic loss. Targets are binarized at 0.5; with n
// masked entries of which n+ are positive, positives are weighted n / (2 n+)
// and negatives n / (2 n-). A batch without one of the classes falls back to
// unit weights. Predictions are clamped to [1e-6, 1 - 1e-6] inside the logs.
template <class Real>
basic_tensor<Real> balanced_bce(const basic_tensor<Real>& pred, const std::vector<double>& target,
                                const std::vector<double>& mask = {}) {
  const auto m = detail::full_mask(target.size(), mask);
  detail::require_targets(pred, target, m, "balanced_bce");
  double n = 0, n_pos = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (m[i] <= 0.0) continue;
    n += 1;
    if (target[i] > 0.5) n_pos += 1;
  }
  if (n == 0) return detail::zero_loss(pred);
  const double n_neg = n - n_pos;
  const bool balanced = n_pos > 0 && n_neg > 0;
  const double w_pos = balanced ? n / (2.0 * n_pos) : 1.0;
  const double w_neg = balanced ? n / (2.0 * n_neg) : 1.0;
  std::vector<Real> c_pos(target.size(), Real(0)), c_neg(target.size(), Real(0));
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (m[i] <= 0.0) continue;
    if (target[i] > 0.5) {
      c_pos[i] = static_cast<Real>(w_pos);
    } else {
      c_neg[i] = static_cast<Real>(w_neg);
    }
  }
  auto p = clamp(pred, Real(kProbabilityFloor), Real(1 - kProbabilityFloor));
  auto pos_term = weighted_sum(log(p), basic_tensor<Real>::vector(std::move(c_pos)));
  auto neg_term =
      weighted_sum(log(affine(p, Real(-1), Real(1))), basic_tensor<Real>::vector(std::move(c_neg)));
  return scale(add(pos_term, neg_term), Real(-1) / static_cast<Real>(n));
}

// Mean Huber (unit transition) over masked entries.
template <class Real>
basic_tensor<Real> smooth_l1_loss(const basic_tensor<Real>& pred,
                                  const std::vector<double>& target,
                                  const std::vector<double>& mask = {}) {
  const auto m = detail::full_mask(target.size(), mask);
  detail::require_targets(pred, target, m, "smooth_l1_loss");
  double n = 0;
  std::vector<Real> weights(target.size(), Real(0));
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] > 0.0) {
      weights[i] = Real(1);
      n += 1;
    }
  }
  if (n == 0) return detail::zero_loss(pred);
  std::vector<Real> t(target.begin(), target.end());
  auto d = sub(pred, basic_tensor<Real>::vector(std::move(t)));
  return scale(weighted_sum(smooth_l1(d), basic_tensor<Real>::vector(std::move(weights))),
               Real(1) / static_cast<Real>(n));
}

template <class Real>
basic_tensor<Real> loss_bp(const boundary_outputs<Real>& out, const boundary_labels& labels,
                           const std::vector<double>& mask = {}) {
  return add(balanced_bce(out.start, labels.start, mask), balanced_bce(out.end, labels.end, mask));
}

template <class Real>
basic_tensor<Real> loss_frame(const frame_outputs<Real>& out, const frame_labels& labels,
                              const std::vector<double>& mask = {}) {
  return add(balanced_bce(out.action, labels.action, mask),
             balanced_bce(out.background, labels.background, mask));
}

// Anchors used by the regression term: all with action label > 0.3 plus an
// equal number drawn without replacement from the rest.
inline std::vector<double> regression_mask(const std::vector<double>& action_labels,
                                           const std::vector<double>& mask,
                                           std::uint64_t sampling_seed) {
  const auto m = detail::full_mask(action_labels.size(), mask);
  std::vector<double> out(action_labels.size(), 0.0);
  std::vector<std::size_t> negatives;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < action_labels.size(); ++i) {
    if (m[i] <= 0.0) continue;
    if (action_labels[i] > kRegressionPositive) {
      out[i] = 1.0;
      ++positives;
    } else {
      negatives.push_back(i);
    }
  }
  rng gen(sampling_seed);
  const std::size_t take = std::min(positives, negatives.size());
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + gen.below(negatives.size() - i);
    std::swap(negatives[i], negatives[j]);
    out[negatives[i]] = 1.0;
  }
  return out;
}

template <class Real>
basic_tensor<Real> loss_clip(const clip_outputs<Real>& out, const anchor_label_set& labels,
                             const std::vector<double>& mask, std::uint64_t sampling_seed) {
  auto cls = balanced_bce(out.action_classification, labels.action, mask);
  auto reg = smooth_l1_loss(out.action_regression, labels.action,
                            regression_mask(labels.action, mask, sampling_seed));
  auto bg = balanced_bce(out.background, labels.background, mask);
  return add(add(cls, reg), bg);
}

template <class Real>
struct loss_breakdown {
  basic_tensor<Real> boundary;  // L1
  basic_tensor<Real> frame;
  basic_tensor<Real> clip;
  basic_tensor<Real> total;  // L1 + (L_frame + L_clip)
};

template <class Real>
loss_breakdown<Real> total_loss(const model_outputs<Real>& out, const label_bundle& labels,
                                std::uint64_t sampling_seed) {
  auto l1 = loss_bp(out.boundary, labels.boundary, labels.step_mask);
  auto lf = loss_frame(out.frame, labels.frame, labels.step_mask);
  auto lc = loss_clip(out.clip, labels.anchors, labels.anchor_mask, sampling_seed);
  auto total = add(l1, add(lf, lc));
  return {std::move(l1), std::move(lf), std::move(lc), std::move(total)};
}

}  // namespace bcnet
