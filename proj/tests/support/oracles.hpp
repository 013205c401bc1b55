#pragma once

// Independent reference implementations used only by tests. They share no
// code with the library beyond the plain data types.

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "bcnet/eval.hpp"
#include "bcnet/interval.hpp"

namespace oracle {

using bcnet::interval;

// Measure of the set {x : pred(x)} on the real line, by integrating over the
// elementary segments between all endpoints.
inline double sweep_measure(const std::vector<interval>& all,
                            const std::function<bool(double)>& pred) {
  std::vector<double> cuts;
  for (const auto& i : all) {
    cuts.push_back(i.start);
    cuts.push_back(i.end);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double mid = 0.5 * (cuts[k] + cuts[k + 1]);
    if (pred(mid)) total += cuts[k + 1] - cuts[k];
  }
  return total;
}

inline bool inside(const interval& i, double x) { return i.start < x && x < i.end; }

inline double tiou(const interval& a, const interval& b) {
  const double inter = sweep_measure({a, b}, [&](double x) { return inside(a, x) && inside(b, x); });
  const double uni = sweep_measure({a, b}, [&](double x) { return inside(a, x) || inside(b, x); });
  return uni > 0 ? inter / uni : 0.0;
}

inline double action_label(const interval& p, const std::vector<interval>& gts) {
  double best = 0.0;
  for (const auto& g : gts) best = std::max(best, oracle::tiou(p, g));
  return best;
}

inline double background_label(const interval& p, const std::vector<interval>& gts) {
  std::vector<interval> all = gts;
  all.push_back(p);
  const double covered = sweep_measure(all, [&](double x) {
    if (!inside(p, x)) return false;
    for (const auto& g : gts) {
      if (inside(g, x)) return true;
    }
    return false;
  });
  return 1.0 - covered / p.length();
}

inline bool ranked_before(const bcnet::scored_segment& a, const bcnet::scored_segment& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.segment.start != b.segment.start) return a.segment.start < b.segment.start;
  return a.segment.length() < b.segment.length();
}

// Exhaustive search over all partial one-to-one assignments of ranked
// detections to gts (each pair at or above the threshold). Returns the
// assignment that is lexicographically best in rank order, comparing per
// detection (matched, tIoU, -gt index); this is the greedy matching by
// construction. Result holds the gt index per detection or -1.
inline std::vector<int> enumerate_matching(const std::vector<interval>& dets,
                                           const std::vector<interval>& gts, double threshold) {
  using key = std::vector<std::tuple<int, double, int>>;
  key best_key;
  std::vector<int> best, current(dets.size(), -1);
  std::vector<bool> used(gts.size(), false);
  bool have = false;
  std::function<void(std::size_t, key&)> rec = [&](std::size_t d, key& k) {
    if (d == dets.size()) {
      if (!have || k > best_key) {
        best_key = k;
        best = current;
        have = true;
      }
      return;
    }
    k.emplace_back(0, 0.0, 0);
    current[d] = -1;
    rec(d + 1, k);
    k.pop_back();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g]) continue;
      const double v = oracle::tiou(dets[d], gts[g]);
      if (v < threshold) continue;
      used[g] = true;
      current[d] = static_cast<int>(g);
      k.emplace_back(1, v, -static_cast<int>(g));
      rec(d + 1, k);
      k.pop_back();
      used[g] = false;
      current[d] = -1;
    }
  };
  key k;
  rec(0, k);
  return best;
}

inline double average_recall(const bcnet::proposals_by_video& props, const bcnet::gts_by_video& gts,
                             std::size_t an, const std::vector<double>& thresholds) {
  double sum = 0.0;
  for (double t : thresholds) {
    double hit = 0.0, total = 0.0;
    for (const auto& [video, g] : gts) {
      total += static_cast<double>(g.size());
      std::vector<bcnet::scored_segment> ranked;
      if (auto it = props.find(video); it != props.end()) ranked = it->second;
      std::sort(ranked.begin(), ranked.end(), ranked_before);
      if (ranked.size() > an) ranked.resize(an);
      std::vector<interval> d, gs;
      for (const auto& r : ranked) d.push_back(r.segment);
      for (const auto& x : g) gs.push_back(x.segment);
      for (int m : enumerate_matching(d, gs, t)) hit += m >= 0 ? 1.0 : 0.0;
    }
    sum += total > 0 ? hit / total : 0.0;
  }
  return sum / static_cast<double>(thresholds.size());
}

inline double auc(const bcnet::proposals_by_video& props, const bcnet::gts_by_video& gts,
                  std::size_t max_an, const std::vector<double>& thresholds) {
  double s = 0.0;
  for (std::size_t an = 1; an <= max_an; ++an) s += average_recall(props, gts, an, thresholds);
  return s / static_cast<double>(max_an);
}

// AP = (1 / positives) * sum over true-positive ranks k of the best precision
// at any rank >= k.
inline double average_precision(const bcnet::proposals_by_video& dets,
                                const bcnet::gts_by_video& gts, const std::string& label,
                                double threshold) {
  struct item {
    bcnet::scored_segment s;
    std::string video;
  };
  std::vector<item> all;
  for (const auto& [video, list] : dets) {
    for (const auto& d : list) {
      if (d.label == label) all.push_back({d, video});
    }
  }
  std::sort(all.begin(), all.end(), [](const item& a, const item& b) {
    if (ranked_before(a.s, b.s)) return true;
    if (ranked_before(b.s, a.s)) return false;
    return a.video < b.video;
  });
  std::size_t positives = 0;
  std::map<std::string, std::vector<interval>> class_gts;
  for (const auto& [video, g] : gts) {
    for (const auto& x : g) {
      if (x.label == label) {
        class_gts[video].push_back(x.segment);
        ++positives;
      }
    }
  }
  if (positives == 0) return 0.0;
  std::vector<bool> tp(all.size(), false);
  for (const auto& [video, gs] : class_gts) {
    std::vector<interval> d;
    std::vector<std::size_t> where;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (all[i].video == video) {
        d.push_back(all[i].s.segment);
        where.push_back(i);
      }
    }
    const auto m = enumerate_matching(d, gs, threshold);
    for (std::size_t j = 0; j < m.size(); ++j) tp[where[j]] = m[j] >= 0;
  }
  std::vector<double> precision(all.size());
  double hits = 0.0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    hits += tp[i] ? 1.0 : 0.0;
    precision[i] = hits / static_cast<double>(i + 1);
  }
  double ap = 0.0;
  for (std::size_t k = 0; k < all.size(); ++k) {
    if (!tp[k]) continue;
    ap += *std::max_element(precision.begin() + static_cast<std::ptrdiff_t>(k), precision.end());
  }
  return ap / static_cast<double>(positives);
}

inline double mean_ap(const bcnet::proposals_by_video& dets, const bcnet::gts_by_video& gts,
                      double threshold) {
  std::set<std::string> labels;
  for (const auto& [video, g] : gts) {
    for (const auto& x : g) labels.insert(x.label);
  }
  if (labels.empty()) return 0.0;
  double s = 0.0;
  for (const auto& l : labels) s += oracle::average_precision(dets, gts, l, threshold);
  return s / static_cast<double>(labels.size());
}

}  // namespace oracle
