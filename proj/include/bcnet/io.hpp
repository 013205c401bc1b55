#pragma once

#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "bcnet/datamodel.hpp"
#include "bcnet/eval.hpp"
#include "bcnet/inference.hpp"
#include "bcnet/training.hpp"

// File formats: feature CSV / f32 + manifest, ActivityNet-style annotations,
// proposals, checkpoints, training logs and evaluation reports.

namespace bcnet::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw contract_error("format_double failed");
  return {buf, end};
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write " + path.string());
  out << text;
  if (!out) throw data_error("write failed for " + path.string());
}

inline json read_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw parse_error(path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(1) + "\n"); }

// ---------------------------------------------------------------- features

// Parses one row of comma-separated reals; `row` is 1-based for messages.
inline std::vector<double> parse_csv_row(const std::string& line, std::size_t row,
                                         const std::string& source) {
  std::vector<double> out;
  std::size_t col = 1, pos = 0;
  while (true) {
    std::size_t comma = line.find(',', pos);
    std::size_t stop = comma == std::string::npos ? line.size() : comma;
    std::size_t a = pos, b = stop;
    while (a < b && (line[a] == ' ' || line[a] == '\t')) ++a;
    while (b > a && (line[b - 1] == ' ' || line[b - 1] == '\t' || line[b - 1] == '\r')) --b;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(line.data() + a, line.data() + b, v);
    if (a == b || ec != std::errc() || ptr != line.data() + b || !std::isfinite(v)) {
      throw parse_error(source + ": row " + std::to_string(row) + ", column " +
                        std::to_string(col) + ": not a finite number: '" +
                        line.substr(a, b - a) + "'");
    }
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
    ++col;
  }
  return out;
}

// One row per step, one column per channel.
inline video_features read_feature_csv(const fs::path& path, const std::string& video_id,
                                       double seconds_per_step) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open " + path.string());
  std::vector<double> values;
  std::size_t rows = 0, cols = 0, line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto row = parse_csv_row(line, line_no, path.string());
    if (rows == 0) cols = row.size();
    if (row.size() != cols) {
      throw parse_error(path.string() + ": row " + std::to_string(line_no) + " has " +
                        std::to_string(row.size()) + " columns, expected " +
                        std::to_string(cols));
    }
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows < 2) throw data_error(path.string() + ": T >= 2 violated");
  video_features v;
  v.video_id = video_id;
  v.features = Tensor::from_values({rows, cols}, std::move(values));
  v.seconds_per_step = seconds_per_step;
  v.valid_length = rows;
  validate(v);
  return v;
}

inline void write_feature_csv(const fs::path& path, const video_features& v) {
  std::string text;
  const auto vals = v.features.values();
  const std::size_t c = v.channels();
  for (std::size_t t = 0; t < v.length(); ++t) {
    for (std::size_t k = 0; k < c; ++k) {
      if (k) text += ',';
      text += format_double(vals[t * c + k]);
    }
    text += '\n';
  }
  write_text(path, text);
}

// Raw little-endian float32, row-major [T x C].
inline video_features read_feature_f32(const fs::path& path, const std::string& video_id,
                                       std::size_t length, std::size_t channels,
                                       double seconds_per_step) {
  const std::string bytes = read_text(path);
  if (bytes.size() != length * channels * 4) {
    throw manifest_error(path.string() + ": holds " + std::to_string(bytes.size() / 4) +
                         " floats, manifest says " + std::to_string(length) + "x" +
                         std::to_string(channels));
  }
  if (length < 2) throw data_error(path.string() + ": T >= 2 violated");
  std::vector<double> values(length * channels);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 3; b >= 0; --b) {
      bits = (bits << 8) | static_cast<unsigned char>(bytes[i * 4 + static_cast<std::size_t>(b)]);
    }
    float f;
    std::memcpy(&f, &bits, 4);
    if (!std::isfinite(f)) {
      throw parse_error(path.string() + ": row " + std::to_string(i / channels + 1) +
                        ", column " + std::to_string(i % channels + 1) + ": non-finite value");
    }
    values[i] = f;
  }
  video_features v;
  v.video_id = video_id;
  v.features = Tensor::from_values({length, channels}, std::move(values));
  v.seconds_per_step = seconds_per_step;
  v.valid_length = length;
  validate(v);
  return v;
}

inline void write_feature_f32(const fs::path& path, const video_features& v) {
  std::string bytes;
  bytes.reserve(v.features.size() * 4);
  for (double x : v.features.values()) {
    const float f = static_cast<float>(x);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
  }
  write_text(path, bytes);
}

struct manifest_entry {
  std::string video_id;
  std::size_t length = 0;  // T
  std::size_t channels = 0;  // C
  double seconds_per_step = 1.0;

  bool operator==(const manifest_entry&) const = default;
};

inline std::vector<manifest_entry> read_manifest(const fs::path& path) {
  const json j = read_json(path);
  if (!j.is_array()) throw manifest_error(path.string() + ": expected a JSON array");
  std::vector<manifest_entry> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    try {
      out.push_back({e.at("video_id").get<std::string>(), e.at("T").get<std::size_t>(),
                     e.at("C").get<std::size_t>(), e.at("seconds_per_step").get<double>()});
    } catch (const json::exception& ex) {
      throw manifest_error(path.string() + ": entry " + std::to_string(i) + ": " + ex.what());
    }
  }
  return out;
}

inline void write_manifest(const fs::path& path, const std::vector<manifest_entry>& entries) {
  json j = json::array();
  for (const auto& e : entries) {
    j.push_back({{"video_id", e.video_id},
                 {"T", e.length},
                 {"C", e.channels},
                 {"seconds_per_step", e.seconds_per_step}});
  }
  write_json(path, j);
}

// Loads every manifest entry from `<dir>/<video_id>.csv`, falling back to
// `<dir>/<video_id>.f32`, and checks the shape against the manifest.
inline std::vector<video_features> load_features(const fs::path& dir,
                                                 const std::vector<manifest_entry>& manifest) {
  std::vector<video_features> out;
  for (const auto& e : manifest) {
    const fs::path csv = dir / (e.video_id + ".csv");
    const fs::path f32 = dir / (e.video_id + ".f32");
    video_features v;
    if (fs::exists(csv)) {
      v = read_feature_csv(csv, e.video_id, e.seconds_per_step);
      if (v.length() != e.length || v.channels() != e.channels) {
        throw manifest_error(csv.string() + ": shape " + shape_string(v.features.shape()) +
                             " does not match manifest [" + std::to_string(e.length) + "x" +
                             std::to_string(e.channels) + "]");
      }
    } else if (fs::exists(f32)) {
      v = read_feature_f32(f32, e.video_id, e.length, e.channels, e.seconds_per_step);
    } else {
      throw data_error("no feature file for " + e.video_id + " in " + dir.string());
    }
    out.push_back(std::move(v));
  }
  return out;
}

// ------------------------------------------------------------- annotations

using annotation_map = std::map<std::string, annotation_set>;

inline annotation_map annotations_from_json(const json& root, const std::string& source) {
  const json& db = root.contains("database") ? root.at("database") : root;
  if (!db.is_object()) throw parse_error(source + ": expected an object of videos");
  annotation_map out;
  for (const auto& [id, entry] : db.items()) {
    annotation_set a;
    a.video_id = id;
    try {
      a.duration = entry.value("duration", 0.0);
      for (const auto& inst : entry.at("annotations")) {
        const auto& seg = inst.at("segment");
        if (!seg.is_array() || seg.size() != 2) {
          throw parse_error(source + ": " + id + ": segment must be [start, end]");
        }
        a.instances.push_back(
            {{seg[0].get<double>(), seg[1].get<double>()}, inst.value("label", std::string())});
      }
    } catch (const json::exception& ex) {
      throw parse_error(source + ": " + id + ": " + ex.what());
    }
    validate(a);
    out.emplace(id, std::move(a));
  }
  return out;
}

inline annotation_map read_annotations(const fs::path& path) {
  return annotations_from_json(read_json(path), path.string());
}

inline json annotations_to_json(const annotation_map& anns) {
  json db = json::object();
  for (const auto& [id, a] : anns) {
    json list = json::array();
    for (const auto& inst : a.instances) {
      json item = {{"segment", {inst.segment.start, inst.segment.end}}};
      if (!inst.label.empty()) item["label"] = inst.label;
      list.push_back(item);
    }
    db[id] = {{"duration", a.duration}, {"annotations", list}};
  }
  return {{"database", db}};
}

inline void write_annotations(const fs::path& path, const annotation_map& anns) {
  write_json(path, annotations_to_json(anns));
}

inline gts_by_video to_ground_truth(const annotation_map& anns) {
  gts_by_video out;
  for (const auto& [id, a] : anns) {
    auto& list = out[id];
    for (const auto& inst : a.instances) list.push_back({inst.segment, inst.label});
  }
  return out;
}

// --------------------------------------------------------------- proposals

using proposal_map = std::map<std::string, std::vector<proposal>>;

inline json proposals_to_json(const proposal_map& props) {
  json root = json::object();
  for (const auto& [id, list] : props) {
    json arr = json::array();
    for (const auto& p : list) {
      arr.push_back({{"segment", {p.t_start, p.t_end}},
                     {"score", p.score},
                     {"components",
                      {{"p_start", p.p_start},
                       {"p_end", p.p_end},
                       {"p_action_cls", p.p_action_cls},
                       {"p_action_reg", p.p_action_reg},
                       {"p_background", p.p_background}}}});
    }
    root[id] = arr;
  }
  return root;
}

inline void write_proposals_json(const fs::path& path, const proposal_map& props) {
  write_json(path, proposals_to_json(props));
}

inline void write_proposals_csv(const fs::path& path, const proposal_map& props) {
  std::string text =
      "video_id,rank,t_start,t_end,score,p_start,p_end,p_action_cls,p_action_reg,p_background\n";
  for (const auto& [id, list] : props) {
    for (std::size_t r = 0; r < list.size(); ++r) {
      const auto& p = list[r];
      text += id + ',' + std::to_string(r + 1);
      for (double v : {p.t_start, p.t_end, p.score, p.p_start, p.p_end, p.p_action_cls,
                       p.p_action_reg, p.p_background}) {
        text += ',' + format_double(v);
      }
      text += '\n';
    }
  }
  write_text(path, text);
}

// Reads {video_id: [{segment, score, label?}]}, with or without a "results"
// wrapper as produced by ActivityNet tooling.
inline proposals_by_video read_proposals(const fs::path& path) {
  const json root = read_json(path);
  const json& body = root.contains("results") ? root.at("results") : root;
  if (!body.is_object()) throw parse_error(path.string() + ": expected an object of videos");
  proposals_by_video out;
  for (const auto& [id, list] : body.items()) {
    auto& dst = out[id];
    try {
      for (const auto& item : list) {
        const auto& seg = item.at("segment");
        if (!seg.is_array() || seg.size() != 2) {
          throw parse_error(path.string() + ": " + id + ": segment must be [start, end]");
        }
        dst.push_back({{seg[0].get<double>(), seg[1].get<double>()},
                       item.at("score").get<double>(),
                       item.value("label", std::string())});
      }
    } catch (const json::exception& ex) {
      throw parse_error(path.string() + ": " + id + ": " + ex.what());
    }
  }
  return out;
}

inline proposals_by_video to_scored(const proposal_map& props, const std::string& label = {}) {
  proposals_by_video out;
  for (const auto& [id, list] : props) {
    auto& dst = out[id];
    for (const auto& p : list) dst.push_back({p.segment(), p.score, label});
  }
  return out;
}

// -------------------------------------------------------------- checkpoint

inline constexpr const char* kCheckpointFormat = "bcnet-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline json to_json(const model_config& m) {
  return {{"input_dim", m.input_dim},         {"model_dim", m.model_dim},
          {"bp_layers", m.bp_layers},         {"scales", m.scales},
          {"anchor_samples", m.anchor_samples}, {"ffn_ratio", m.ffn_ratio},
          {"keep_ratio", m.keep_ratio}};
}

inline model_config model_config_from_json(const json& j) {
  model_config m;
  m.input_dim = j.at("input_dim").get<std::size_t>();
  m.model_dim = j.at("model_dim").get<std::size_t>();
  m.bp_layers = j.at("bp_layers").get<std::size_t>();
  m.scales = j.at("scales").get<std::vector<std::size_t>>();
  m.anchor_samples = j.at("anchor_samples").get<std::size_t>();
  m.ffn_ratio = j.at("ffn_ratio").get<double>();
  m.keep_ratio = j.at("keep_ratio").get<double>();
  return m;
}

inline json to_json(const train_config& c) {
  return {{"lr", c.lr},
          {"decay_factor", c.decay_factor},
          {"decay_every", c.decay_every},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"batch", c.batch},
          {"model", to_json(c.model)}};
}

inline train_config train_config_from_json(const json& j) {
  train_config c;
  c.lr = j.at("lr").get<double>();
  c.decay_factor = j.at("decay_factor").get<double>();
  c.decay_every = j.at("decay_every").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.batch = j.at("batch").get<std::size_t>();
  c.model = model_config_from_json(j.at("model"));
  return c;
}

// {"format": "bcnet-checkpoint", "version": 1, "config": {...},
//  "epochs_completed": n, "parameters": [{"name", "shape", "values"}],
//  "optimizer": {"step", "first_moment", "second_moment"}}
inline json checkpoint_to_json(const checkpoint& ck) {
  json params = json::array();
  for (const auto& p : ck.parameters) {
    params.push_back({{"name", p.name}, {"shape", p.shape}, {"values", p.values}});
  }
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"config", to_json(ck.config)},
          {"epochs_completed", ck.epochs_completed},
          {"parameters", params},
          {"optimizer",
           {{"step", ck.optimizer.step},
            {"first_moment", ck.optimizer.first_moment},
            {"second_moment", ck.optimizer.second_moment}}}};
}

inline checkpoint checkpoint_from_json(const json& j, const std::string& source) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) {
      throw data_error(source + ": not a bcnet checkpoint");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw data_error(source + ": unsupported checkpoint version " +
                       std::to_string(j.at("version").get<int>()));
    }
    checkpoint ck;
    ck.config = train_config_from_json(j.at("config"));
    ck.epochs_completed = j.at("epochs_completed").get<std::size_t>();
    for (const auto& p : j.at("parameters")) {
      ck.parameters.push_back({p.at("name").get<std::string>(), p.at("shape").get<Shape>(),
                               p.at("values").get<std::vector<double>>()});
    }
    const auto& o = j.at("optimizer");
    ck.optimizer.step = o.at("step").get<std::uint64_t>();
    ck.optimizer.first_moment = o.at("first_moment").get<std::vector<std::vector<double>>>();
    ck.optimizer.second_moment = o.at("second_moment").get<std::vector<std::vector<double>>>();
    return ck;
  } catch (const json::exception& ex) {
    throw parse_error(source + ": " + ex.what());
  }
}

inline void write_checkpoint(const fs::path& path, const checkpoint& ck) {
  write_text(path, checkpoint_to_json(ck).dump() + "\n");
}

inline checkpoint read_checkpoint(const fs::path& path) {
  return checkpoint_from_json(read_json(path), path.string());
}

// ------------------------------------------------------------ training log

inline constexpr const char* kTrainLogHeader = "epoch,lr,L1,L_frame,L_clip,total\n";

inline std::string train_log_row(const epoch_log& e) {
  return std::to_string(e.epoch) + ',' + format_double(e.lr) + ',' + format_double(e.boundary) +
         ',' + format_double(e.frame) + ',' + format_double(e.clip) + ',' +
         format_double(e.total) + '\n';
}

inline std::vector<epoch_log> read_train_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open " + path.string());
  std::vector<epoch_log> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    const auto row = parse_csv_row(line, line_no, path.string());
    if (row.size() != 6) throw parse_error(path.string() + ": row " + std::to_string(line_no) +
                                           " must have 6 columns");
    out.push_back({static_cast<std::size_t>(row[0]), row[1], row[2], row[3], row[4], row[5]});
  }
  return out;
}

// ------------------------------------------------------------- eval report

inline json report_to_json(const eval_report& r) {
  json ar = json::object();
  for (const auto& [an, v] : r.ar_at_an) ar["AR@" + std::to_string(an)] = v;
  json j = {{"ar_at_an", ar},
            {"auc", r.auc},
            {"max_an", r.curve.size()},
            {"tiou_thresholds", r.thresholds}};
  if (!r.map_at_tiou.empty()) {
    json m = json::object();
    for (const auto& [t, v] : r.map_at_tiou) m[format_double(t)] = v;
    j["map_at_tiou"] = m;
    j["average_map"] = r.average_map;
  }
  return j;
}

inline void write_report(const fs::path& path, const eval_report& r) {
  write_json(path, report_to_json(r));
}

inline void write_ar_curve_csv(const fs::path& path, const eval_report& r) {
  std::string text = "AN,AR\n";
  for (std::size_t i = 0; i < r.curve.size(); ++i) {
    text += std::to_string(i + 1) + ',' + format_double(r.curve[i]) + '\n';
  }
  write_text(path, text);
}

}  // namespace bcnet::io
