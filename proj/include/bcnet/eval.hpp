#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "bcnet/interval.hpp"
#include "bcnet/numeric/error.hpp"

// Proposal-quality and detection metrics.

namespace bcnet {

struct scored_segment {
  interval segment;
  double score = 0.0;
  std::string label;  // used by mAP only
};

struct ground_truth {
  interval segment;
  std::string label;
};

using proposals_by_video = std::map<std::string, std::vector<scored_segment>>;
using gts_by_video = std::map<std::string, std::vector<ground_truth>>;

// tIoU thresholds 0.50, 0.55, ..., up to `last`.
inline std::vector<double> tiou_thresholds(double last) {
  std::vector<double> out;
  for (int k = 0; 50 + 5 * k <= static_cast<int>(std::lround(last * 100.0)); ++k) {
    out.push_back(static_cast<double>(50 + 5 * k) / 100.0);
  }
  return out;
}
inline std::vector<double> thumos_thresholds() { return tiou_thresholds(1.0); }
inline std::vector<double> anet_thresholds() { return tiou_thresholds(0.95); }

// Descending score; ties go to the earlier start, then the shorter segment.
inline bool scored_before(const scored_segment& a, const scored_segment& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.segment.start != b.segment.start) return a.segment.start < b.segment.start;
  return a.segment.length() < b.segment.length();
}

inline std::vector<scored_segment> sorted_by_score(std::vector<scored_segment> v) {
  std::stable_sort(v.begin(), v.end(), scored_before);
  return v;
}

// Greedy one-to-one matching: each detection, in the given order, takes the
// unmatched gt of highest tIoU at or above the threshold (ties to the lower
// gt index). Returns, per detection, whether it matched.
inline std::vector<bool> greedy_match(const std::vector<scored_segment>& ranked,
                                      const std::vector<interval>& gts, double threshold) {
  std::vector<bool> taken(gts.size(), false);
  std::vector<bool> hit(ranked.size(), false);
  for (std::size_t d = 0; d < ranked.size(); ++d) {
    double best = -1.0;
    std::size_t best_gt = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double v = tiou(ranked[d].segment, gts[g]);
      if (v >= threshold && v > best) {
        best = v;
        best_gt = g;
      }
    }
    if (best_gt < gts.size()) {
      taken[best_gt] = true;
      hit[d] = true;
    }
  }
  return hit;
}

namespace detail {

inline std::vector<interval> gt_segments(const std::vector<ground_truth>& g) {
  std::vector<interval> out;
  for (const auto& x : g) out.push_back(x.segment);
  return out;
}

inline void require_thresholds(const std::vector<double>& thresholds) {
  if (thresholds.empty()) throw contract_error("metrics need at least one tIoU threshold");
}

}  // namespace detail

// Recall at each threshold using the top-`an` proposals per video. Videos with
// ground truth but no entry in `proposals` count as having no proposals.
inline std::vector<double> recall_per_threshold(const proposals_by_video& proposals,
                                                const gts_by_video& gts, std::size_t an,
                                                const std::vector<double>& thresholds) {
  detail::require_thresholds(thresholds);
  std::vector<double> matched(thresholds.size(), 0.0);
  std::size_t total = 0;
  for (const auto& [video, g] : gts) {
    total += g.size();
    auto it = proposals.find(video);
    if (it == proposals.end() || g.empty()) continue;
    auto ranked = sorted_by_score(it->second);
    if (ranked.size() > an) ranked.resize(an);
    const auto segs = detail::gt_segments(g);
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
      const auto hit = greedy_match(ranked, segs, thresholds[k]);
      matched[k] += static_cast<double>(std::count(hit.begin(), hit.end(), true));
    }
  }
  if (total == 0) return std::vector<double>(thresholds.size(), 0.0);
  for (auto& m : matched) m /= static_cast<double>(total);
  return matched;
}

inline double average_recall_at_an(const proposals_by_video& proposals, const gts_by_video& gts,
                                   std::size_t an, const std::vector<double>& thresholds) {
  const auto r = recall_per_threshold(proposals, gts, an, thresholds);
  double s = 0.0;
  for (double v : r) s += v;
  return s / static_cast<double>(r.size());
}

// AR at AN = 1..max_an.
inline std::vector<double> ar_curve(const proposals_by_video& proposals, const gts_by_video& gts,
                                    std::size_t max_an, const std::vector<double>& thresholds) {
  std::vector<double> out;
  out.reserve(max_an);
  for (std::size_t an = 1; an <= max_an; ++an) {
    out.push_back(average_recall_at_an(proposals, gts, an, thresholds));
  }
  return out;
}

// Mean of the AR curve over AN = 1..max_an, in [0, 1].
inline double auc_ar_curve(const proposals_by_video& proposals, const gts_by_video& gts,
                           std::size_t max_an, const std::vector<double>& thresholds) {
  if (max_an == 0) throw contract_error("auc_ar_curve: max_an must be >= 1");
  const auto curve = ar_curve(proposals, gts, max_an, thresholds);
  double s = 0.0;
  for (double v : curve) s += v;
  return s / static_cast<double>(curve.size());
}

// All-points interpolated AP of a ranked hit list against `positives` gts.
inline double interpolated_ap(const std::vector<bool>& hits, std::size_t positives) {
  if (positives == 0) return 0.0;
  std::vector<double> precision, recall;
  double tp = 0.0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (hits[i]) tp += 1.0;
    precision.push_back(tp / static_cast<double>(i + 1));
    recall.push_back(tp / static_cast<double>(positives));
  }
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

// AP of one class at one threshold, ranking detections across all videos.
inline double average_precision(const proposals_by_video& detections, const gts_by_video& gts,
                                const std::string& label, double threshold) {
  struct ranked {
    scored_segment det;
    std::string video;
  };
  std::vector<ranked> all;
  for (const auto& [video, dets] : detections) {
    for (const auto& d : dets) {
      if (d.label == label) all.push_back({d, video});
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const ranked& a, const ranked& b) {
    if (scored_before(a.det, b.det)) return true;
    if (scored_before(b.det, a.det)) return false;
    return a.video < b.video;
  });
  std::map<std::string, std::vector<interval>> class_gts;
  std::size_t positives = 0;
  for (const auto& [video, g] : gts) {
    for (const auto& x : g) {
      if (x.label == label) {
        class_gts[video].push_back(x.segment);
        ++positives;
      }
    }
  }
  std::map<std::string, std::vector<bool>> taken;
  for (const auto& [video, segs] : class_gts) taken[video].assign(segs.size(), false);
  std::vector<bool> hits;
  for (const auto& r : all) {
    bool hit = false;
    auto it = class_gts.find(r.video);
    if (it != class_gts.end()) {
      auto& used = taken[r.video];
      double best = -1.0;
      std::size_t best_gt = used.size();
      for (std::size_t g = 0; g < it->second.size(); ++g) {
        if (used[g]) continue;
        const double v = tiou(r.det.segment, it->second[g]);
        if (v >= threshold && v > best) {
          best = v;
          best_gt = g;
        }
      }
      if (best_gt < used.size()) {
        used[best_gt] = true;
        hit = true;
      }
    }
    hits.push_back(hit);
  }
  return interpolated_ap(hits, positives);
}

struct map_result {
  std::map<double, double> per_threshold;  // threshold -> mAP over classes
  double average = 0.0;
};

// mAP over the classes present in the ground truth, per threshold, and its
// mean over thresholds.
inline map_result mean_average_precision(const proposals_by_video& detections,
                                         const gts_by_video& gts,
                                         const std::vector<double>& thresholds) {
  detail::require_thresholds(thresholds);
  std::set<std::string> labels;
  for (const auto& [video, g] : gts) {
    for (const auto& x : g) labels.insert(x.label);
  }
  map_result out;
  for (double t : thresholds) {
    double s = 0.0;
    for (const auto& label : labels) s += average_precision(detections, gts, label, t);
    const double m = labels.empty() ? 0.0 : s / static_cast<double>(labels.size());
    out.per_threshold[t] = m;
    out.average += m;
  }
  out.average /= static_cast<double>(thresholds.size());
  return out;
}

struct eval_report {
  std::map<std::size_t, double> ar_at_an;
  std::vector<double> curve;  // AR at AN = 1..max_an
  double auc = 0.0;
  std::map<double, double> map_at_tiou;  // empty when mAP was not requested
  double average_map = 0.0;
  std::vector<double> thresholds;
};

inline eval_report evaluate(const proposals_by_video& proposals, const gts_by_video& gts,
                            const std::vector<std::size_t>& report_an, std::size_t max_an,
                            const std::vector<double>& thresholds, bool with_map,
                            const std::vector<double>& map_thresholds = anet_thresholds()) {
  eval_report r;
  r.thresholds = thresholds;
  r.curve = ar_curve(proposals, gts, max_an, thresholds);
  for (std::size_t an : report_an) {
    r.ar_at_an[an] = an >= 1 && an <= r.curve.size()
                         ? r.curve[an - 1]
                         : average_recall_at_an(proposals, gts, an, thresholds);
  }
  double s = 0.0;
  for (double v : r.curve) s += v;
  r.auc = r.curve.empty() ? 0.0 : s / static_cast<double>(r.curve.size());
  if (with_map) {
    auto m = mean_average_precision(proposals, gts, map_thresholds);
    r.map_at_tiou = std::move(m.per_threshold);
    r.average_map = m.average;
  }
  return r;
}

}  // namespace bcnet
