#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "bcnet/interval.hpp"
#include "bcnet/numeric/random.hpp"
#include "bcnet/numeric/tensor.hpp"

namespace bcnet {

// A per-video feature sequence, or one window cut from it.
struct video_features {
  std::string video_id;
  Tensor features;  // [T x C]
  double seconds_per_step = 1.0;
  // Leading steps that hold real data; the remainder is zero padding.
  std::size_t valid_length = 0;
  // Start of this sequence in the source video, in seconds.
  double offset_seconds = 0.0;

  std::size_t length() const { return features.rows(); }
  std::size_t channels() const { return features.cols(); }
  double duration() const { return static_cast<double>(valid_length) * seconds_per_step; }
};

struct annotation {
  interval segment;
  std::string label;
};

struct annotation_set {
  std::string video_id;
  double duration = 0.0;
  std::vector<annotation> instances;

  std::vector<interval> segments() const {
    std::vector<interval> out;
    out.reserve(instances.size());
    for (const auto& a : instances) out.push_back(a.segment);
    return out;
  }
};

struct window_spec {
  std::size_t length = 256;
  std::size_t stride = 128;
};

inline void validate(const video_features& v) {
  if (!v.features || v.features.rank() != 2) {
    throw data_error(v.video_id + ": features must be a [T x C] matrix");
  }
  if (v.length() < 2) throw data_error(v.video_id + ": T >= 2 violated");
  if (!(v.seconds_per_step > 0.0)) {
    throw data_error(v.video_id + ": seconds_per_step must be positive");
  }
  if (v.valid_length > v.length()) {
    throw data_error(v.video_id + ": valid length exceeds T");
  }
}

inline void validate(const annotation_set& a) {
  for (const auto& inst : a.instances) {
    if (!(inst.segment.start < inst.segment.end)) {
      throw data_error(a.video_id + ": annotation with start >= end");
    }
    if (inst.segment.start < 0.0 || (a.duration > 0.0 && inst.segment.end > a.duration + 1e-9)) {
      throw data_error(a.video_id + ": annotation outside [0, duration]");
    }
  }
}

inline void validate(const window_spec& w) {
  if (w.stride == 0 || w.stride > w.length) {
    throw contract_error("window spec requires 0 < stride <= length");
  }
}

// Channelwise linear interpolation onto `target` uniformly spaced positions
// over [0, T-1]. The step duration is rescaled so (T-1) * dt is preserved.
inline video_features rescale_linear(const video_features& v, std::size_t target) {
  if (target < 2) throw contract_error("rescale_linear: target length must be >= 2");
  validate(v);
  const std::size_t t_in = v.length(), c = v.channels();
  const auto src = v.features.values();
  std::vector<double> out(target * c);
  for (std::size_t j = 0; j < target; ++j) {
    const double x = static_cast<double>(j * (t_in - 1)) / static_cast<double>(target - 1);
    auto lo = static_cast<std::size_t>(std::floor(x));
    if (lo >= t_in - 1) lo = t_in - 1;
    const double frac = x - static_cast<double>(lo);
    for (std::size_t k = 0; k < c; ++k) {
      double value = src[lo * c + k];
      if (frac > 0.0) value = (1.0 - frac) * value + frac * src[(lo + 1) * c + k];
      out[j * c + k] = value;
    }
  }
  video_features r = v;
  r.features = Tensor::from_values({target, c}, std::move(out));
  r.seconds_per_step =
      static_cast<double>(t_in - 1) * v.seconds_per_step / static_cast<double>(target - 1);
  r.valid_length = target;
  return r;
}

struct feature_window {
  video_features features;
  annotation_set annotations;
};

// Step offsets of overlapping windows; the last window may run past T.
inline std::vector<std::size_t> window_starts(std::size_t length, const window_spec& spec) {
  validate(spec);
  std::vector<std::size_t> starts;
  for (std::size_t start = 0;; start += spec.stride) {
    starts.push_back(start);
    if (start + spec.length >= length) break;
  }
  return starts;
}

// Cuts overlapping windows. A partial final window is zero padded and keeps
// its valid length. Annotations are clipped to the window's valid extent and
// shifted to window-local time; clipped pieces shorter than one step are
// dropped.
inline std::vector<feature_window> window_split(const video_features& v, const window_spec& spec,
                                                const annotation_set& anns) {
  validate(v);
  const std::size_t t_in = std::max<std::size_t>(v.valid_length, 1);
  const std::size_t c = v.channels();
  const auto src = v.features.values();
  const double dt = v.seconds_per_step;
  std::vector<feature_window> windows;
  for (std::size_t start : window_starts(t_in, spec)) {
    const std::size_t valid = std::min(spec.length, t_in - start);
    std::vector<double> values(spec.length * c, 0.0);
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(start * c),
              src.begin() + static_cast<std::ptrdiff_t>((start + valid) * c), values.begin());
    feature_window w;
    w.features.video_id = v.video_id;
    w.features.features = Tensor::from_values({spec.length, c}, std::move(values));
    w.features.seconds_per_step = dt;
    w.features.valid_length = valid;
    w.features.offset_seconds = v.offset_seconds + static_cast<double>(start) * dt;

    const interval extent{static_cast<double>(start) * dt,
                          static_cast<double>(start + valid) * dt};
    w.annotations.video_id = v.video_id;
    w.annotations.duration = static_cast<double>(valid) * dt;
    for (const auto& inst : anns.instances) {
      const double s = std::max(inst.segment.start, extent.start);
      const double e = std::min(inst.segment.end, extent.end);
      if (e - s < dt) continue;
      w.annotations.instances.push_back({{s - extent.start, e - extent.start}, inst.label});
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

struct synth_options {
  double seconds_per_step = 1.0;
  // Euclidean distance between each class mean and the background mean.
  double margin = 3.0;
  double noise = 0.5;
  std::size_t classes = 2;
  // Instance length range in steps; 0 picks max(2, T/16) and max(min, T/4).
  std::size_t min_length = 0;
  std::size_t max_length = 0;
  // Distractor segments per video: a feature pattern that differs from the
  // background as much as an action does but is not annotated.
  std::size_t hard_background = 0;
};

struct synth_video {
  video_features features;
  annotation_set annotations;
};

struct synth_patterns {
  std::vector<double> background;
  std::vector<std::vector<double>> classes;
  std::vector<double> distractor;
};

namespace detail {

inline std::vector<double> unit_direction(std::size_t c, rng& gen) {
  std::vector<double> d(c);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : d) {
      x = gen.normal();
      norm += x * x;
    }
  } while (norm < 1e-12);
  norm = std::sqrt(norm);
  for (auto& x : d) x /= norm;
  return d;
}

}  // namespace detail

// Mean patterns derived from the seed: background, one per class, and the
// distractor, each non-background pattern at distance `margin` from it.
inline synth_patterns synth_mean_patterns(std::uint64_t seed, std::size_t channels,
                                          const synth_options& opt) {
  rng gen(seed ^ 0xB0C5EEDULL);
  synth_patterns p;
  p.background.resize(channels);
  for (auto& x : p.background) x = gen.normal(0.0, 0.5);
  auto offset = [&](rng& g) {
    auto dir = detail::unit_direction(channels, g);
    std::vector<double> m(channels);
    for (std::size_t k = 0; k < channels; ++k) m[k] = p.background[k] + opt.margin * dir[k];
    return m;
  };
  for (std::size_t k = 0; k < std::max<std::size_t>(opt.classes, 1); ++k) {
    p.classes.push_back(offset(gen));
  }
  p.distractor = offset(gen);
  return p;
}

// Deterministic synthetic dataset: non-overlapping instances drawn from class
// mean patterns plus Gaussian noise over a distinct background pattern.
inline std::vector<synth_video> synth_generate(std::uint64_t seed, std::size_t n_videos,
                                               std::size_t length, std::size_t channels,
                                               std::size_t max_instances,
                                               const synth_options& opt = {}) {
  if (length < 8) throw contract_error("synth_generate: T >= 8 required");
  if (channels == 0) throw contract_error("synth_generate: C >= 1 required");
  const std::size_t min_len = opt.min_length ? opt.min_length : std::max<std::size_t>(2, length / 16);
  const std::size_t max_len =
      std::max(min_len, opt.max_length ? opt.max_length : std::max(min_len, length / 4));
  if (max_len >= length) throw contract_error("synth_generate: instance length >= T");
  const synth_patterns patterns = synth_mean_patterns(seed, channels, opt);
  rng gen(seed);

  std::vector<synth_video> out;
  out.reserve(n_videos);
  for (std::size_t v = 0; v < n_videos; ++v) {
    // Occupied [start, end) step ranges, each padded by one step of gap.
    std::vector<std::pair<std::size_t, std::size_t>> taken;
    auto place = [&](std::size_t len) -> std::ptrdiff_t {
      for (int attempt = 0; attempt < 200; ++attempt) {
        const std::size_t start = gen.below(length - len + 1);
        const std::size_t end = start + len;
        bool clash = false;
        for (auto [s, e] : taken) {
          if (start < e + 1 && s < end + 1) {
            clash = true;
            break;
          }
        }
        if (!clash) {
          taken.emplace_back(start, end);
          return static_cast<std::ptrdiff_t>(start);
        }
      }
      return -1;
    };

    struct segment {
      std::size_t start, end;
      int kind;  // class index, or -1 for a distractor
    };
    std::vector<segment> segments;
    const std::size_t count = max_instances == 0 ? 0 : 1 + gen.below(max_instances);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t len = min_len + gen.below(max_len - min_len + 1);
      const auto start = place(len);
      if (start < 0) continue;
      const auto cls = static_cast<int>(gen.below(patterns.classes.size()));
      segments.push_back({static_cast<std::size_t>(start), static_cast<std::size_t>(start) + len, cls});
    }
    for (std::size_t i = 0; i < opt.hard_background; ++i) {
      const std::size_t len = min_len + gen.below(max_len - min_len + 1);
      const auto start = place(len);
      if (start < 0) continue;
      segments.push_back({static_cast<std::size_t>(start), static_cast<std::size_t>(start) + len, -1});
    }

    std::vector<const std::vector<double>*> mean_at(length, &patterns.background);
    for (const auto& s : segments) {
      const auto* m = s.kind < 0 ? &patterns.distractor : &patterns.classes[static_cast<std::size_t>(s.kind)];
      for (std::size_t t = s.start; t < s.end; ++t) mean_at[t] = m;
    }
    std::vector<double> values(length * channels);
    for (std::size_t t = 0; t < length; ++t) {
      for (std::size_t k = 0; k < channels; ++k) {
        values[t * channels + k] = (*mean_at[t])[k] + opt.noise * gen.normal();
      }
    }

    synth_video sv;
    char id[32];
    std::snprintf(id, sizeof id, "synth_%04zu", v);
    sv.features.video_id = id;
    sv.features.features = Tensor::from_values({length, channels}, std::move(values));
    sv.features.seconds_per_step = opt.seconds_per_step;
    sv.features.valid_length = length;
    sv.annotations.video_id = id;
    sv.annotations.duration = static_cast<double>(length) * opt.seconds_per_step;
    std::sort(segments.begin(), segments.end(),
              [](const segment& a, const segment& b) { return a.start < b.start; });
    for (const auto& s : segments) {
      if (s.kind < 0) continue;
      sv.annotations.instances.push_back(
          {{static_cast<double>(s.start) * opt.seconds_per_step,
            static_cast<double>(s.end) * opt.seconds_per_step},
           "class_" + std::to_string(s.kind)});
    }
    out.push_back(std::move(sv));
  }
  return out;
}

}  // namespace bcnet
