#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <tuple>
#include <vector>

#include "bcnet/anchors.hpp"
#include "bcnet/datamodel.hpp"
#include "bcnet/interval.hpp"
#include "bcnet/model.hpp"

// Post-processing from network outputs to a ranked proposal list: boundary
// peak pairing, anchor matching, refinement, score fusion and Soft-NMS.

namespace bcnet {

struct candidate {
  std::size_t start = 0;  // step index of the start boundary
  std::size_t end = 0;    // step index of the end boundary
  double p_start = 0.0;
  double p_end = 0.0;
};

struct proposal {
  double t_start = 0.0;  // seconds
  double t_end = 0.0;
  double p_start = 0.0;
  double p_end = 0.0;
  double p_action_cls = 0.0;
  double p_action_reg = 0.0;
  double p_background = 0.0;
  double score = 0.0;  // fused confidence

  interval segment() const { return {t_start, t_end}; }
};

struct inference_options {
  double alpha1 = 0.9;  // classification threshold for refinement
  double alpha2 = 0.8;  // regression threshold for refinement
  double sigma = 0.5;
  double score_floor = 1e-3;
  std::size_t top_k = 1000;
  std::size_t max_candidates = 5000;
  // Longest candidate in steps; 0 uses the largest anchor scale.
  std::size_t max_duration = 0;
  // Multiply the fused score by (1 - background score).
  bool background_constraint = true;
};

// Steps below `limit` that are strict local maxima (out-of-range neighbours
// count as -inf) or exceed half of the maximum.
inline std::vector<std::size_t> boundary_peaks(const std::vector<double>& prob,
                                               std::size_t limit) {
  limit = std::min(limit, prob.size());
  std::vector<std::size_t> peaks;
  if (limit == 0) return peaks;
  const double top = *std::max_element(prob.begin(), prob.begin() + static_cast<std::ptrdiff_t>(limit));
  for (std::size_t t = 0; t < limit; ++t) {
    const bool above_left = t == 0 || prob[t] > prob[t - 1];
    const bool above_right = t + 1 >= limit || prob[t] > prob[t + 1];
    if ((above_left && above_right) || prob[t] > 0.5 * top) peaks.push_back(t);
  }
  return peaks;
}

// Every start peak paired with every later end peak at most `max_duration`
// steps away (0 = unlimited), keeping the `max_candidates` best by
// p_start * p_end.
inline std::vector<candidate> construct_candidates(const std::vector<double>& start_prob,
                                                   const std::vector<double>& end_prob,
                                                   std::size_t max_duration,
                                                   std::size_t limit = SIZE_MAX,
                                                   std::size_t max_candidates = 5000) {
  if (start_prob.size() != end_prob.size()) {
    throw dimension_error("construct_candidates: start/end sequences differ in length");
  }
  const auto starts = boundary_peaks(start_prob, limit);
  const auto ends = boundary_peaks(end_prob, limit);
  std::vector<candidate> out;
  for (std::size_t s : starts) {
    for (std::size_t e : ends) {
      if (e <= s) continue;
      if (max_duration && e - s > max_duration) continue;
      out.push_back({s, e, start_prob[s], end_prob[e]});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const candidate& a, const candidate& b) {
    return a.p_start * a.p_end > b.p_start * b.p_end;
  });
  if (max_candidates && out.size() > max_candidates) out.resize(max_candidates);
  return out;
}

// Index of the anchor with the highest tIoU; ties go to the smaller index.
inline std::size_t match_anchor(const interval& candidate_steps, const anchor_grid& grid) {
  if (grid.empty()) throw contract_error("match_anchor: empty anchor grid");
  std::size_t best = 0;
  double best_iou = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = tiou(candidate_steps, grid.anchors[i].steps());
    if (v > best_iou) {
      best_iou = v;
      best = i;
    }
  }
  return best;
}

// Midpoint of candidate and anchor endpoints when both anchor scores clear
// their thresholds; otherwise the candidate unchanged.
inline interval refine_proposal(const interval& cand, const interval& matched,
                                double cls_score, double reg_score, double alpha1 = 0.9,
                                double alpha2 = 0.8) {
  if (alpha1 < 0.0 || alpha1 > 1.0 || alpha2 < 0.0 || alpha2 > 1.0) {
    throw contract_error("refine_proposal: thresholds must lie in [0, 1]");
  }
  if (cls_score > alpha1 && reg_score > alpha2) {
    return {(cand.start + matched.start) / 2.0, (cand.end + matched.end) / 2.0};
  }
  return cand;
}

inline double fuse_scores_without_background(const proposal& p) {
  return p.p_start * p.p_end * p.p_action_reg * p.p_action_cls;
}

inline double fuse_scores(const proposal& p) {
  return fuse_scores_without_background(p) * (1.0 - p.p_background);
}

// Descending score; ties go to the earlier start, then the shorter proposal.
inline bool ranks_before(const proposal& a, const proposal& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.t_start != b.t_start) return a.t_start < b.t_start;
  return a.t_end - a.t_start < b.t_end - b.t_start;
}

// Gaussian Soft-NMS: repeatedly keep the best remaining proposal and decay
// the others by exp(-tIoU^2 / sigma); proposals that fall below the floor are
// dropped. Returns at most top_k proposals in descending score order.
inline std::vector<proposal> soft_nms(std::vector<proposal> items, double sigma = 0.5,
                                      double score_floor = 1e-3, std::size_t top_k = 1000) {
  if (!(sigma > 0.0)) throw contract_error("soft_nms: sigma must be positive");
  std::vector<proposal> kept;
  items.erase(std::remove_if(items.begin(), items.end(),
                             [&](const proposal& p) { return p.score < score_floor; }),
              items.end());
  while (!items.empty() && kept.size() < top_k) {
    const auto best = std::min_element(items.begin(), items.end(), ranks_before);
    const proposal chosen = *best;
    items.erase(best);
    const interval ref = chosen.segment();
    for (auto& p : items) {
      const double overlap = tiou(ref, p.segment());
      p.score *= std::exp(-(overlap * overlap) / sigma);
    }
    items.erase(std::remove_if(items.begin(), items.end(),
                               [&](const proposal& p) { return p.score < score_floor; }),
                items.end());
    kept.push_back(chosen);
  }
  return kept;
}

namespace detail {

inline std::vector<double> as_doubles(const Tensor& t) { return t.to_vector(); }

}  // namespace detail

// Proposals of one sequence in source-video seconds, before suppression.
inline std::vector<proposal> window_proposals(const model_outputs<double>& out,
                                              const video_features& window,
                                              const anchor_grid& grid,
                                              const inference_options& opt) {
  const auto ps = detail::as_doubles(out.boundary.start);
  const auto pe = detail::as_doubles(out.boundary.end);
  const auto cls = detail::as_doubles(out.clip.action_classification);
  const auto reg = detail::as_doubles(out.clip.action_regression);
  const auto bg = detail::as_doubles(out.clip.background);
  std::size_t max_duration = opt.max_duration;
  if (max_duration == 0) {
    for (const auto& a : grid.anchors) max_duration = std::max(max_duration, a.end - a.start);
  }
  const std::size_t limit = window.valid_length ? window.valid_length : window.length();
  const double dt = window.seconds_per_step;
  std::vector<proposal> result;
  for (const auto& c : construct_candidates(ps, pe, max_duration, limit, opt.max_candidates)) {
    const interval steps{static_cast<double>(c.start), static_cast<double>(c.end)};
    const std::size_t m = match_anchor(steps, grid);
    const interval refined =
        refine_proposal(steps, grid.anchors[m].steps(), cls[m], reg[m], opt.alpha1, opt.alpha2);
    proposal p;
    p.t_start = window.offset_seconds + refined.start * dt;
    p.t_end = window.offset_seconds + refined.end * dt;
    p.p_start = c.p_start;
    p.p_end = c.p_end;
    p.p_action_cls = cls[m];
    p.p_action_reg = reg[m];
    p.p_background = bg[m];
    p.score = opt.background_constraint ? fuse_scores(p) : fuse_scores_without_background(p);
    result.push_back(p);
  }
  return result;
}

// Merges window proposals into one list; an interval produced by several
// overlapping windows keeps its best-scoring instance.
inline std::vector<proposal> merge_window_proposals(const std::vector<std::vector<proposal>>& parts) {
  std::map<std::pair<std::int64_t, std::int64_t>, proposal> unique;
  for (const auto& part : parts) {
    for (const auto& p : part) {
      const std::pair<std::int64_t, std::int64_t> key{std::llround(p.t_start * 1e6),
                                                      std::llround(p.t_end * 1e6)};
      auto [it, inserted] = unique.emplace(key, p);
      if (!inserted && ranks_before(p, it->second)) it->second = p;
    }
  }
  std::vector<proposal> out;
  out.reserve(unique.size());
  for (auto& [key, p] : unique) out.push_back(p);
  return out;
}

// Full chain for one video given its windows (a single window for unwindowed
// inputs): forward, candidates, matching, refinement, fusion, Soft-NMS.
inline std::vector<proposal> run_inference(const model& net,
                                           const std::vector<video_features>& windows,
                                           const inference_options& opt = {}) {
  no_grad_guard no_grad;
  std::vector<std::vector<proposal>> parts;
  std::map<std::size_t, anchor_grid> grids;
  for (const auto& w : windows) {
    validate(w);
    auto it = grids.find(w.length());
    if (it == grids.end()) it = grids.emplace(w.length(), net.grid_for(w.length())).first;
    auto out = net.forward(w.features, it->second);
    parts.push_back(window_proposals(out, w, it->second, opt));
  }
  for (auto& part : parts) {
    for (auto& p : part) {
      if (!(p.t_start < p.t_end)) {
        throw numeric_error("run_inference produced a degenerate proposal");
      }
    }
  }
  return soft_nms(merge_window_proposals(parts), opt.sigma, opt.score_floor, opt.top_k);
}

}  // namespace bcnet
