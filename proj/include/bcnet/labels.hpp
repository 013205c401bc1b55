#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "bcnet/anchors.hpp"
#include "bcnet/datamodel.hpp"
#include "bcnet/interval.hpp"

// Supervision signals: action (tIoU) and background (tIoA) scores for
// intervals, boundary and frame label sequences, and per-anchor labels.

namespace bcnet {

// Max tIoU of the proposal against the ground truths; 0 with none.
inline double action_label_tiou(const interval& p, const std::vector<interval>& gts) {
  require_proper(p, "action_label_tiou");
  double best = 0.0;
  for (const auto& g : gts) best = std::max(best, tiou(p, g));
  return best;
}

// 1 - (covered part of the proposal) / |p|, where coverage is taken against
// the union of the ground truths so overlapping instances are not counted
// twice.
inline double background_label_tioa(const interval& p, const std::vector<interval>& gts) {
  require_proper(p, "background_label_tioa");
  double covered = 0.0;
  for (const auto& g : merge_overlapping(gts)) covered += intersection_length(p, g);
  return std::clamp(1.0 - covered / p.length(), 0.0, 1.0);
}

struct boundary_labels {
  std::vector<double> start;
  std::vector<double> end;
};

// Step t is positive when its cell [t - 0.5, t + 0.5] strictly overlaps a
// region of +-d/10 around a boundary, all in step units (seconds / dt).
inline boundary_labels boundary_label_seq(const std::vector<interval>& instances,
                                          std::size_t length, double seconds_per_step) {
  boundary_labels out{std::vector<double>(length, 0.0), std::vector<double>(length, 0.0)};
  auto mark = [&](std::vector<double>& seq, double boundary, double radius) {
    const double lo = boundary - radius, hi = boundary + radius;
    const double first = std::max(0.0, std::floor(lo - 0.5));
    for (auto t = static_cast<std::size_t>(first); t < length; ++t) {
      const double cell_lo = static_cast<double>(t) - 0.5, cell_hi = static_cast<double>(t) + 0.5;
      if (cell_lo >= hi) break;
      if (std::max(cell_lo, lo) < std::min(cell_hi, hi)) seq[t] = 1.0;
    }
  };
  for (const auto& inst : instances) {
    const double s = inst.start / seconds_per_step, e = inst.end / seconds_per_step;
    const double radius = (e - s) / 10.0;
    mark(out.start, s, radius);
    mark(out.end, e, radius);
  }
  return out;
}

struct frame_labels {
  std::vector<double> action;
  std::vector<double> background;
};

// G_a[t] = 1 when the step centre (t + 0.5) * dt lies inside an instance;
// G_b is its complement.
inline frame_labels frame_actionness_labels(const std::vector<interval>& instances,
                                            std::size_t length, double seconds_per_step) {
  frame_labels out{std::vector<double>(length, 0.0), std::vector<double>(length, 1.0)};
  for (std::size_t t = 0; t < length; ++t) {
    const double centre = (static_cast<double>(t) + 0.5) * seconds_per_step;
    for (const auto& inst : instances) {
      if (inst.start <= centre && centre <= inst.end) {
        out.action[t] = 1.0;
        out.background[t] = 0.0;
        break;
      }
    }
  }
  return out;
}

struct anchor_label_set {
  std::vector<double> action;
  std::vector<double> background;
};

inline anchor_label_set anchor_labels(const anchor_grid& grid, const std::vector<interval>& gts,
                                      double seconds_per_step) {
  if (grid.empty()) throw contract_error("anchor_labels: empty anchor grid");
  anchor_label_set out;
  out.action.reserve(grid.size());
  out.background.reserve(grid.size());
  for (const auto& a : grid.anchors) {
    const interval span = a.seconds(seconds_per_step);
    out.action.push_back(action_label_tiou(span, gts));
    out.background.push_back(background_label_tioa(span, gts));
  }
  return out;
}

// Every supervision target for one (possibly padded) sequence, plus the
// masks that exclude padding.
struct label_bundle {
  boundary_labels boundary;
  frame_labels frame;
  anchor_label_set anchors;
  std::vector<double> step_mask;    // 1 for valid steps
  std::vector<double> anchor_mask;  // 1 for anchors that start inside the valid region
};

inline label_bundle make_labels(const video_features& v, const annotation_set& anns,
                                const anchor_grid& grid) {
  const auto segments = anns.segments();
  label_bundle b;
  b.boundary = boundary_label_seq(segments, v.length(), v.seconds_per_step);
  b.frame = frame_actionness_labels(segments, v.length(), v.seconds_per_step);
  b.anchors = anchor_labels(grid, segments, v.seconds_per_step);
  b.step_mask.assign(v.length(), 0.0);
  for (std::size_t t = 0; t < std::min(v.valid_length, v.length()); ++t) b.step_mask[t] = 1.0;
  b.anchor_mask.assign(grid.size(), 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid.anchors[i].start < v.valid_length) b.anchor_mask[i] = 1.0;
  }
  return b;
}

}  // namespace bcnet
