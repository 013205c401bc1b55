#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "bcnet/interval.hpp"
#include "bcnet/log.hpp"
#include "bcnet/numeric/tensor.hpp"

namespace bcnet {

struct anchor {
  std::size_t start = 0;  // first step
  std::size_t end = 0;    // one past the covered region, in steps
  std::size_t scale_id = 0;

  interval steps() const {
    return {static_cast<double>(start), static_cast<double>(end)};
  }
  interval seconds(double seconds_per_step) const {
    return {static_cast<double>(start) * seconds_per_step,
            static_cast<double>(end) * seconds_per_step};
  }
};

// Multi-scale sliding-window anchors over a sequence of `length` steps, with
// the interpolation matrices that pool `samples` points per anchor.
struct anchor_grid {
  std::size_t length = 0;
  std::size_t samples = 0;
  std::vector<std::size_t> scales;
  std::vector<anchor> anchors;
  // [L x N x T], row-major: weights[(l * N + n) * T + t].
  std::vector<double> weights;

  std::size_t size() const { return anchors.size(); }
  bool empty() const { return anchors.empty(); }

  double weight(std::size_t a, std::size_t n, std::size_t t) const {
    return weights[(a * samples + n) * length + t];
  }

  // The sampling matrices stacked to [(L * N) x T].
  template <class Real>
  basic_tensor<Real> sampling_matrix() const {
    std::vector<Real> v(weights.begin(), weights.end());
    return basic_tensor<Real>::from_values({anchors.size() * samples, length}, std::move(v));
  }

  Tensor weight_tensor() const {
    return Tensor::from_values({anchors.size(), samples, length}, weights);
  }
};

// Position of sample n of N inside [start, end] (in steps). Samples are spread
// uniformly including both endpoints; a single sample sits at the midpoint.
inline double sample_position(const anchor& a, std::size_t n, std::size_t count) {
  const double s = static_cast<double>(a.start), e = static_cast<double>(a.end);
  if (count == 1) return 0.5 * (s + e);
  return s + (e - s) * static_cast<double>(n) / static_cast<double>(count - 1);
}

// Scales default to {T/16, T/8, T/4, T/2, T} (rounded, deduplicated).
inline std::vector<std::size_t> default_scales(std::size_t length) {
  std::set<std::size_t> unique;
  for (std::size_t div : {16, 8, 4, 2, 1}) {
    const auto s = static_cast<std::size_t>(
        std::lround(static_cast<double>(length) / static_cast<double>(div)));
    if (s >= 1) unique.insert(s);
  }
  return {unique.begin(), unique.end()};
}

// For each scale s, windows [k * s/2, k * s/2 + s] that fit in [0, length].
// Each sample's weight row linearly interpolates onto the two neighbouring
// integer steps; steps outside [0, length) receive no weight.
inline anchor_grid build_anchor_grid(std::size_t length, const std::vector<std::size_t>& scales,
                                     std::size_t samples = 32, std::size_t max_anchors = 0) {
  if (scales.empty()) throw contract_error("build_anchor_grid: no scales given");
  if (samples == 0) throw contract_error("build_anchor_grid: need at least one sample");
  anchor_grid grid;
  grid.length = length;
  grid.samples = samples;
  for (std::size_t id = 0; id < scales.size(); ++id) {
    const std::size_t s = scales[id];
    if (s == 0 || s > length) {
      logging::warn("anchor scale " + std::to_string(s) + " skipped for length " +
                std::to_string(length));
      continue;
    }
    grid.scales.push_back(s);
    const std::size_t stride = std::max<std::size_t>(1, s / 2);
    for (std::size_t start = 0; start + s <= length; start += stride) {
      if (max_anchors && grid.anchors.size() >= max_anchors) break;
      grid.anchors.push_back({start, start + s, id});
    }
  }
  if (grid.anchors.empty()) {
    throw contract_error("build_anchor_grid: no scale fits length " + std::to_string(length));
  }
  grid.weights.assign(grid.anchors.size() * samples * length, 0.0);
  for (std::size_t a = 0; a < grid.anchors.size(); ++a) {
    for (std::size_t n = 0; n < samples; ++n) {
      const double pos = sample_position(grid.anchors[a], n, samples);
      const double lo = std::floor(pos);
      const double frac = pos - lo;
      const auto base = static_cast<std::size_t>(lo);
      double* row = grid.weights.data() + (a * samples + n) * length;
      if (base < length) row[base] += 1.0 - frac;
      if (frac > 0.0 && base + 1 < length) row[base + 1] += frac;
    }
  }
  return grid;
}

}  // namespace bcnet
