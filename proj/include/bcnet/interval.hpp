#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "bcnet/numeric/error.hpp"

namespace bcnet {

// Closed temporal interval [start, end], in seconds unless stated otherwise.
struct interval {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  bool operator==(const interval&) const = default;
};

inline double intersection_length(const interval& a, const interval& b) {
  return std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
}

inline double union_length(const interval& a, const interval& b) {
  return a.length() + b.length() - intersection_length(a, b);
}

inline double tiou(const interval& a, const interval& b) {
  const double inter = intersection_length(a, b);
  const double uni = a.length() + b.length() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

inline void require_proper(const interval& p, const char* what) {
  if (!(p.start < p.end)) {
    throw contract_error(std::string(what) + ": degenerate interval [" +
                         std::to_string(p.start) + ", " + std::to_string(p.end) + "]");
  }
}

// Union of the input as a sorted list of disjoint intervals. Touching
// intervals are joined.
inline std::vector<interval> merge_overlapping(std::vector<interval> items) {
  std::sort(items.begin(), items.end(), [](const interval& a, const interval& b) {
    return a.start < b.start || (a.start == b.start && a.end < b.end);
  });
  std::vector<interval> merged;
  for (const auto& it : items) {
    if (!merged.empty() && it.start <= merged.back().end) {
      merged.back().end = std::max(merged.back().end, it.end);
    } else {
      merged.push_back(it);
    }
  }
  return merged;
}

}  // namespace bcnet
