#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "bcnet/datamodel.hpp"
#include "bcnet/labels.hpp"
#include "bcnet/log.hpp"
#include "bcnet/losses.hpp"
#include "bcnet/model.hpp"

namespace bcnet {

struct train_config {
  double lr = 1e-4;
  double decay_factor = 0.1;
  std::size_t decay_every = 10;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  // Sequences whose gradients are averaged into one optimizer step.
  std::size_t batch = 1;
  model_config model;

  bool operator==(const train_config&) const = default;

  // Step schedule over 1-based epochs: lr * factor^floor((epoch - 1) / every).
  double lr_at(std::size_t epoch) const {
    if (epoch == 0 || decay_every == 0) return lr;
    return lr * std::pow(decay_factor, static_cast<double>((epoch - 1) / decay_every));
  }

  void validate() const {
    if (!(lr > 0.0)) throw config_error("lr must be > 0");
    if (epochs < 1) throw config_error("epochs must be >= 1");
    if (batch < 1) throw config_error("batch must be >= 1");
    if (decay_every < 1) throw config_error("decay_every must be >= 1");
  }
};

struct adam_state {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  bool operator==(const adam_state&) const = default;
};

class adam {
 public:
  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double epsilon = 1e-8;

  explicit adam(nn::parameter_list<double> params) : params_(std::move(params)) {
    for (const auto& [name, t] : params_) {
      state_.first_moment.emplace_back(t.size(), 0.0);
      state_.second_moment.emplace_back(t.size(), 0.0);
    }
  }

  // One bias-corrected update from the accumulated gradients times
  // grad_scale. Parameters that received no gradient see a zero gradient.
  void step(double lr, double grad_scale = 1.0) {
    ++state_.step;
    const double t = static_cast<double>(state_.step);
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    for (std::size_t p = 0; p < params_.size(); ++p) {
      auto& tensor = params_[p].second;
      const bool has = tensor.has_grad();
      const auto grad = tensor.grad();
      auto values = tensor.mutable_values();
      auto& m = state_.first_moment[p];
      auto& v = state_.second_moment[p];
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double g = has ? grad[i] * grad_scale : 0.0;
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        values[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + epsilon);
      }
    }
  }

  void zero_grad() {
    for (auto& [name, t] : params_) t.zero_grad();
  }

  const adam_state& state() const { return state_; }

  void load(adam_state s) {
    if (s.first_moment.size() != params_.size() || s.second_moment.size() != params_.size()) {
      throw data_error("optimizer state does not match the model");
    }
    for (std::size_t p = 0; p < params_.size(); ++p) {
      if (s.first_moment[p].size() != params_[p].second.size() ||
          s.second_moment[p].size() != params_[p].second.size()) {
        throw data_error("optimizer state size mismatch for " + params_[p].first);
      }
    }
    state_ = std::move(s);
  }

 private:
  nn::parameter_list<double> params_;
  adam_state state_;
};

struct named_values {
  std::string name;
  Shape shape;
  std::vector<double> values;

  bool operator==(const named_values&) const = default;
};

// Everything needed to rebuild a model and continue training it.
struct checkpoint {
  train_config config;
  std::size_t epochs_completed = 0;
  std::vector<named_values> parameters;
  adam_state optimizer;

  bool operator==(const checkpoint&) const = default;
};

// One (possibly windowed) sequence with its grid and supervision.
struct training_sample {
  video_features features;
  annotation_set annotations;
  anchor_grid grid;
  label_bundle labels;
};

inline training_sample make_sample(video_features features, annotation_set annotations,
                                   const model_config& config) {
  validate(features);
  training_sample s;
  s.grid = build_anchor_grid(features.length(), config.scales_for(features.length()),
                             config.anchor_samples);
  s.labels = make_labels(features, annotations, s.grid);
  s.features = std::move(features);
  s.annotations = std::move(annotations);
  return s;
}

struct epoch_log {
  std::size_t epoch = 0;
  double lr = 0.0;
  double boundary = 0.0;  // L1
  double frame = 0.0;
  double clip = 0.0;
  double total = 0.0;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t x = seed ^ (a * 0x9E3779B97F4A7C15ULL) ^ (b * 0xC2B2AE3D27D4EB4FULL);
  x ^= x >> 31;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 29;
  return x;
}

}  // namespace detail

// Adam with step decay over a fixed sample list. All randomness (init,
// visiting order, regression sampling) derives from config.seed.
class trainer {
 public:
  explicit trainer(train_config config)
      : config_(std::move(config)),
        net_(config_.model, detail::mix_seed(config_.seed, 1)),
        optimizer_(net_.parameters()) {
    config_.validate();
  }

  explicit trainer(const checkpoint& ck)
      : config_(ck.config), net_(ck.config.model, 0), optimizer_(net_.parameters()) {
    config_.validate();
    load_parameters(net_, ck.parameters);
    optimizer_.load(ck.optimizer);
    epochs_completed_ = ck.epochs_completed;
  }

  const model& net() const { return net_; }
  const train_config& config() const { return config_; }
  std::size_t epochs_completed() const { return epochs_completed_; }

  // Extends the schedule, e.g. when resuming with a larger epoch budget.
  void set_total_epochs(std::size_t epochs) { config_.epochs = epochs; }

  epoch_log run_epoch(const std::vector<training_sample>& data) {
    if (data.empty()) throw contract_error("train: empty dataset");
    const std::size_t epoch = epochs_completed_ + 1;
    const double lr = config_.lr_at(epoch);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    rng shuffler(detail::mix_seed(config_.seed, 2, epoch));
    shuffler.shuffle(order);

    epoch_log log{epoch, lr, 0, 0, 0, 0};
    std::size_t pending = 0;
    optimizer_.zero_grad();
    for (std::size_t k = 0; k < order.size(); ++k) {
      const auto& s = data[order[k]];
      auto losses = evaluate(s, detail::mix_seed(config_.seed, 3 + order[k], epoch), epoch);
      losses.total.backward();
      log.boundary += losses.boundary.item();
      log.frame += losses.frame.item();
      log.clip += losses.clip.item();
      log.total += losses.total.item();
      if (++pending == config_.batch || k + 1 == order.size()) {
        optimizer_.step(lr, 1.0 / static_cast<double>(pending));
        optimizer_.zero_grad();
        pending = 0;
      }
    }
    const double n = static_cast<double>(data.size());
    log.boundary /= n;
    log.frame /= n;
    log.clip /= n;
    log.total /= n;
    epochs_completed_ = epoch;
    return log;
  }

  // Runs the remaining epochs of the configured budget.
  std::vector<epoch_log> fit(const std::vector<training_sample>& data,
                             const std::function<void(const epoch_log&)>& on_epoch = {}) {
    std::vector<epoch_log> logs;
    while (epochs_completed_ < config_.epochs) {
      logs.push_back(run_epoch(data));
      if (on_epoch) on_epoch(logs.back());
    }
    return logs;
  }

  checkpoint snapshot() const {
    checkpoint ck;
    ck.config = config_;
    ck.epochs_completed = epochs_completed_;
    for (const auto& [name, t] : net_.parameters()) {
      ck.parameters.push_back({name, t.shape(), t.to_vector()});
    }
    ck.optimizer = optimizer_.state();
    return ck;
  }

  static void load_parameters(model& net, const std::vector<named_values>& values) {
    auto params = net.parameters();
    if (params.size() != values.size()) {
      throw data_error("checkpoint holds " + std::to_string(values.size()) +
                       " parameters, model expects " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].first != values[i].name || params[i].second.shape() != values[i].shape) {
        throw data_error("checkpoint parameter " + values[i].name + " does not match " +
                         params[i].first + " " + shape_string(params[i].second.shape()));
      }
      auto dst = params[i].second.mutable_values();
      std::copy(values[i].values.begin(), values[i].values.end(), dst.begin());
    }
  }

 private:
  loss_breakdown<double> evaluate(const training_sample& s, std::uint64_t sampling_seed,
                                  std::size_t epoch) const {
    try {
      auto out = net_.forward(s.features.features, s.grid);
      auto losses = total_loss(out, s.labels, sampling_seed);
      const std::pair<const char*, double> terms[] = {{"L1 (boundary)", losses.boundary.item()},
                                                      {"L_frame", losses.frame.item()},
                                                      {"L_clip", losses.clip.item()}};
      for (const auto& [name, value] : terms) {
        if (!std::isfinite(value)) {
          throw numeric_error(std::string(name) + " is non-finite");
        }
      }
      return losses;
    } catch (const numeric_error& e) {
      throw numeric_error("epoch " + std::to_string(epoch) + ", video " + s.features.video_id +
                          " at offset " + std::to_string(s.features.offset_seconds) + "s: " +
                          e.what());
    }
  }

  train_config config_;
  model net_;
  adam optimizer_;
  std::size_t epochs_completed_ = 0;
};

inline model model_from_checkpoint(const checkpoint& ck) {
  model net(ck.config.model, 0);
  trainer::load_parameters(net, ck.parameters);
  return net;
}

}  // namespace bcnet
