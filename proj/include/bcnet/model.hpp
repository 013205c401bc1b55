#pragma once

#include <cstdint>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "bcnet/abi.hpp"
#include "bcnet/anchors.hpp"
#include "bcnet/bp.hpp"

namespace bcnet {

struct model_config {
  std::size_t input_dim = 2048;
  // Width after the per-step input projection.
  std::size_t model_dim = 32;
  std::size_t bp_layers = 12;
  // Anchor scales in steps; empty selects default_scales(T).
  std::vector<std::size_t> scales;
  // Sample points pooled per anchor.
  std::size_t anchor_samples = 32;
  double ffn_ratio = 4.0;
  double keep_ratio = 1.0;

  bool operator==(const model_config&) const = default;

  std::vector<std::size_t> scales_for(std::size_t length) const {
    return scales.empty() ? default_scales(length) : scales;
  }
};

template <class Real>
struct model_outputs {
  boundary_outputs<Real> boundary;
  frame_outputs<Real> frame;
  clip_outputs<Real> clip;
};

// The full network: per-step input projection shared by a boundary branch
// and an action-background branch.
template <class Real>
class bcnet_model {
 public:
  bcnet_model(model_config config, std::uint64_t seed) : config_(std::move(config)) {
    if (config_.input_dim == 0 || config_.model_dim == 0) {
      throw contract_error("model dimensions must be positive");
    }
    rng gen(seed);
    reduce_ = nn::linear<Real>(config_.input_dim, config_.model_dim, gen);
    frame_ = frame_params<Real>(config_.model_dim, config_.ffn_ratio, gen);
    clip_ = clip_params<Real>(config_.model_dim * config_.anchor_samples, config_.ffn_ratio, gen);
    bp_ = bp_stack<Real>(config_.model_dim, config_.bp_layers, config_.ffn_ratio,
                         config_.keep_ratio, gen);
  }

  const model_config& config() const { return config_; }

  anchor_grid grid_for(std::size_t length) const {
    return build_anchor_grid(length, config_.scales_for(length), config_.anchor_samples);
  }

  model_outputs<Real> forward(const basic_tensor<Real>& features, const anchor_grid& grid) const {
    if (features.rank() != 2 || features.cols() != config_.input_dim) {
      throw dimension_error("model expects [T x " + std::to_string(config_.input_dim) +
                            "] features, got " + shape_string(features.shape()));
    }
    auto reduced = reduce_(features);
    auto boundary = bp_forward(reduced, bp_);
    auto abi = abi_forward(reduced, grid, frame_, clip_);
    return {std::move(boundary), std::move(abi.frame), std::move(abi.clip)};
  }

  model_outputs<Real> forward(const Tensor& features, const anchor_grid& grid) const
    requires(!std::is_same_v<Real, double>)
  {
    return forward(features.cast<Real>(), grid);
  }

  nn::parameter_list<Real> parameters() const {
    nn::parameter_list<Real> out;
    reduce_.collect("reduce", out);
    frame_.collect("frame", out);
    clip_.collect("clip", out);
    bp_.collect("bp", out);
    return out;
  }

  std::size_t parameter_count() const { return nn::parameter_count(parameters()); }

  // Same architecture with parameters converted to another precision.
  template <class To>
  bcnet_model<To> cast() const {
    bcnet_model<To> out(config_, 0);
    auto dst = out.parameters();
    nn::copy_parameters(parameters(), dst);
    return out;
  }

  // Deep copy: parameters are fresh leaves with equal values.
  bcnet_model clone() const { return cast<Real>(); }

  const bp_stack<Real>& boundary_branch() const { return bp_; }
  const frame_params<Real>& frame_branch() const { return frame_; }
  const clip_params<Real>& clip_branch() const { return clip_; }
  const nn::linear<Real>& input_projection() const { return reduce_; }

 private:
  model_config config_;
  nn::linear<Real> reduce_;
  frame_params<Real> frame_;
  clip_params<Real> clip_;
  bp_stack<Real> bp_;
};

using model = bcnet_model<double>;

}  // namespace bcnet
