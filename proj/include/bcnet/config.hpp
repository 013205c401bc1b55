#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "bcnet/datamodel.hpp"
#include "bcnet/eval.hpp"
#include "bcnet/inference.hpp"
#include "bcnet/training.hpp"

// Flat key=value run configuration. '#' starts a comment; later assignments
// replace earlier ones; command-line overrides replace both.

namespace bcnet {

enum class preset { synthetic, thumos, anet };

struct run_config {
  preset dataset = preset::synthetic;

  std::string features;     // directory of <video_id>.csv / .f32
  std::string manifest;     // defaults to <features>/manifest.json
  std::string annotations;  // annotations.json
  std::string checkpoint = "checkpoint.json";
  std::string output = "out";
  std::string proposals;  // eval input; defaults to <output>/proposals.json

  train_config train;
  bool input_dim_set = false;  // otherwise taken from the feature width
  bool resume = false;

  // Sequence handling fixed by the preset unless overridden.
  window_spec window{256, 128};
  std::size_t rescale_length = 0;  // 0 disables rescaling
  bool windowed = false;

  // synth
  std::size_t n_videos = 20;
  std::size_t length = 64;
  std::size_t channels = 16;
  std::size_t max_instances = 3;
  synth_options synth;

  inference_options infer;
  std::size_t workers = 1;

  // eval
  std::vector<double> thresholds = anet_thresholds();
  std::vector<std::size_t> report_an{1, 5, 10, 100};
  std::size_t max_an = 100;
  bool with_map = false;

  std::string manifest_path() const {
    return manifest.empty() ? (std::filesystem::path(features) / "manifest.json").string()
                            : manifest;
  }
  std::string proposals_path() const {
    return proposals.empty() ? (std::filesystem::path(output) / "proposals.json").string()
                             : proposals;
  }
};

using config_entries = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw config_error("config key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw config_error("config key '" + key + "': expected a non-negative integer, got '" + v +
                       "'");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw config_error("config key '" + key + "': expected true/false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    const auto comma = v.find(',', pos);
    const auto item = trim(v.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace detail

// Parses key=value lines; malformed lines are config errors naming the line.
inline config_entries parse_config_text(const std::string& text, const std::string& source) {
  config_entries out;
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw config_error(source + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    if (key.empty()) throw config_error(source + ":" + std::to_string(line_no) + ": empty key");
    out[key] = detail::trim(line.substr(eq + 1));
  }
  return out;
}

inline config_entries read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open config " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text, path.string());
}

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys{
      "preset", "features", "manifest", "annotations", "checkpoint", "output", "proposals",
      "lr", "decay_factor", "decay_every", "epochs", "seed", "batch", "resume",
      "input_dim", "model_dim", "bp_layers", "scales", "anchor_samples", "ffn_ratio",
      "keep_ratio", "window_length", "window_stride", "rescale_length", "n_videos", "length",
      "channels", "max_instances", "margin", "noise", "classes", "hard_background",
      "seconds_per_step", "alpha1", "alpha2", "sigma", "score_floor", "top_k",
      "max_candidates", "max_duration", "background_constraint", "workers", "thresholds",
      "report_an", "max_an", "with_map"};
  return keys;
}

inline void apply_preset(run_config& c, preset p) {
  c.dataset = p;
  switch (p) {
    case preset::thumos:
      c.windowed = true;
      c.window = {256, 128};
      c.rescale_length = 0;
      c.infer.top_k = 1000;
      c.thresholds = thumos_thresholds();
      c.report_an = {50, 100, 200, 500, 1000};
      c.max_an = 1000;
      break;
    case preset::anet:
      c.windowed = false;
      c.rescale_length = 100;
      c.infer.top_k = 100;
      c.thresholds = anet_thresholds();
      c.report_an = {1, 5, 10, 100};
      c.max_an = 100;
      break;
    case preset::synthetic:
      c.windowed = false;
      c.rescale_length = 0;
      c.infer.top_k = 100;
      c.thresholds = anet_thresholds();
      c.report_an = {1, 5, 10, 100};
      c.max_an = 100;
      break;
  }
}

inline preset parse_preset(const std::string& v) {
  if (v == "synthetic") return preset::synthetic;
  if (v == "thumos") return preset::thumos;
  if (v == "anet") return preset::anet;
  throw config_error("config key 'preset': expected synthetic, thumos or anet, got '" + v + "'");
}

// Builds a run configuration: preset defaults first, then every entry.
// Unknown keys are rejected by name.
inline run_config make_run_config(const config_entries& entries) {
  for (const auto& [key, value] : entries) {
    if (!known_config_keys().count(key)) throw config_error("unknown config key '" + key + "'");
  }
  run_config c;
  auto it = entries.find("preset");
  apply_preset(c, it == entries.end() ? preset::synthetic : parse_preset(it->second));

  using namespace detail;
  for (const auto& [k, v] : entries) {
    auto& m = c.train.model;
    if (k == "preset") continue;
    else if (k == "features") c.features = v;
    else if (k == "manifest") c.manifest = v;
    else if (k == "annotations") c.annotations = v;
    else if (k == "checkpoint") c.checkpoint = v;
    else if (k == "output") c.output = v;
    else if (k == "proposals") c.proposals = v;
    else if (k == "lr") c.train.lr = parse_real(k, v);
    else if (k == "decay_factor") c.train.decay_factor = parse_real(k, v);
    else if (k == "decay_every") c.train.decay_every = parse_uint(k, v);
    else if (k == "epochs") c.train.epochs = parse_uint(k, v);
    else if (k == "seed") c.train.seed = parse_uint(k, v);
    else if (k == "batch") c.train.batch = parse_uint(k, v);
    else if (k == "resume") c.resume = parse_bool(k, v);
    else if (k == "input_dim") {
      m.input_dim = parse_uint(k, v);
      c.input_dim_set = true;
    }
    else if (k == "model_dim") m.model_dim = parse_uint(k, v);
    else if (k == "bp_layers") m.bp_layers = parse_uint(k, v);
    else if (k == "scales") {
      m.scales.clear();
      for (const auto& s : split_list(v)) m.scales.push_back(parse_uint(k, s));
    }
    else if (k == "anchor_samples") m.anchor_samples = parse_uint(k, v);
    else if (k == "ffn_ratio") m.ffn_ratio = parse_real(k, v);
    else if (k == "keep_ratio") m.keep_ratio = parse_real(k, v);
    else if (k == "window_length") c.window.length = parse_uint(k, v);
    else if (k == "window_stride") c.window.stride = parse_uint(k, v);
    else if (k == "rescale_length") c.rescale_length = parse_uint(k, v);
    else if (k == "n_videos") c.n_videos = parse_uint(k, v);
    else if (k == "length") c.length = parse_uint(k, v);
    else if (k == "channels") c.channels = parse_uint(k, v);
    else if (k == "max_instances") c.max_instances = parse_uint(k, v);
    else if (k == "margin") c.synth.margin = parse_real(k, v);
    else if (k == "noise") c.synth.noise = parse_real(k, v);
    else if (k == "classes") c.synth.classes = parse_uint(k, v);
    else if (k == "hard_background") c.synth.hard_background = parse_uint(k, v);
    else if (k == "seconds_per_step") c.synth.seconds_per_step = parse_real(k, v);
    else if (k == "alpha1") c.infer.alpha1 = parse_real(k, v);
    else if (k == "alpha2") c.infer.alpha2 = parse_real(k, v);
    else if (k == "sigma") c.infer.sigma = parse_real(k, v);
    else if (k == "score_floor") c.infer.score_floor = parse_real(k, v);
    else if (k == "top_k") c.infer.top_k = parse_uint(k, v);
    else if (k == "max_candidates") c.infer.max_candidates = parse_uint(k, v);
    else if (k == "max_duration") c.infer.max_duration = parse_uint(k, v);
    else if (k == "background_constraint") c.infer.background_constraint = parse_bool(k, v);
    else if (k == "workers") c.workers = parse_uint(k, v);
    else if (k == "thresholds") {
      if (v == "thumos") c.thresholds = thumos_thresholds();
      else if (v == "anet") c.thresholds = anet_thresholds();
      else {
        c.thresholds.clear();
        for (const auto& s : split_list(v)) c.thresholds.push_back(parse_real(k, s));
      }
    }
    else if (k == "report_an") {
      c.report_an.clear();
      for (const auto& s : split_list(v)) c.report_an.push_back(parse_uint(k, s));
    }
    else if (k == "max_an") c.max_an = parse_uint(k, v);
    else if (k == "with_map") c.with_map = parse_bool(k, v);
  }
  if (entries.count("window_length") || entries.count("window_stride")) c.windowed = true;

  c.train.validate();
  if (c.windowed && (c.window.stride == 0 || c.window.stride > c.window.length)) {
    throw config_error("window_stride must satisfy 0 < stride <= window_length");
  }
  if (c.rescale_length == 1) throw config_error("rescale_length must be 0 or >= 2");
  if (c.workers == 0) throw config_error("workers must be >= 1");
  if (c.max_an == 0) throw config_error("max_an must be >= 1");
  if (c.thresholds.empty()) throw config_error("thresholds must not be empty");
  if (c.infer.alpha1 < 0 || c.infer.alpha1 > 1 || c.infer.alpha2 < 0 || c.infer.alpha2 > 1) {
    throw config_error("alpha1 and alpha2 must lie in [0, 1]");
  }
  if (!(c.infer.sigma > 0)) throw config_error("sigma must be > 0");
  if (c.train.model.model_dim == 0) throw config_error("model_dim must be >= 1");
  if (c.train.model.anchor_samples == 0) throw config_error("anchor_samples must be >= 1");
  if (!(c.train.model.ffn_ratio > 0)) throw config_error("ffn_ratio must be > 0");
  if (!(c.train.model.keep_ratio > 0) || c.train.model.keep_ratio > 1) {
    throw config_error("keep_ratio must lie in (0, 1]");
  }
  return c;
}

// File entries overlaid by command-line entries.
inline run_config load_run_config(const std::string& path, const config_entries& overrides) {
  config_entries entries = path.empty() ? config_entries{} : read_config_file(path);
  for (const auto& [k, v] : overrides) entries[k] = v;
  return make_run_config(entries);
}

}  // namespace bcnet
