#pragma once

#include <atomic>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bcnet/config.hpp"
#include "bcnet/eval.hpp"
#include "bcnet/inference.hpp"
#include "bcnet/io.hpp"
#include "bcnet/log.hpp"
#include "bcnet/training.hpp"

// The four pipeline commands behind the command-line tool.

namespace bcnet {

namespace fs = std::filesystem;

// Writes <output>/<id>.csv, <output>/manifest.json and
// <output>/annotations.json.
inline void cmd_synth(const run_config& c) {
  if (c.output.empty()) throw config_error("synth requires 'output'");
  const auto videos =
      synth_generate(c.train.seed, c.n_videos, c.length, c.channels, c.max_instances, c.synth);
  const fs::path dir = c.output;
  std::vector<io::manifest_entry> manifest;
  io::annotation_map anns;
  for (const auto& v : videos) {
    io::write_feature_csv(dir / (v.features.video_id + ".csv"), v.features);
    manifest.push_back({v.features.video_id, v.features.length(), v.features.channels(),
                        v.features.seconds_per_step});
    anns[v.annotations.video_id] = v.annotations;
  }
  io::write_manifest(dir / "manifest.json", manifest);
  io::write_annotations(dir / "annotations.json", anns);
  logging::info("synth: wrote " + std::to_string(videos.size()) + " videos to " + dir.string());
}

// Per-video sequences after the preset's length handling: rescaled, windowed
// or unchanged. Annotations follow the same transform.
inline std::vector<feature_window> prepare_video(const run_config& c, const video_features& v,
                                                 const annotation_set& anns) {
  if (c.rescale_length) {
    return {{rescale_linear(v, c.rescale_length), anns}};
  }
  if (c.windowed) return window_split(v, c.window, anns);
  return {{v, anns}};
}

inline std::vector<video_features> load_config_features(const run_config& c) {
  if (c.features.empty()) throw config_error("missing config key 'features'");
  return io::load_features(c.features, io::read_manifest(c.manifest_path()));
}

inline void resolve_input_dim(run_config& c, const std::vector<video_features>& videos) {
  if (videos.empty()) throw data_error("no videos in " + c.manifest_path());
  const std::size_t width = videos.front().channels();
  for (const auto& v : videos) {
    if (v.channels() != width) {
      throw data_error(v.video_id + ": " + std::to_string(v.channels()) +
                       " channels, expected " + std::to_string(width));
    }
  }
  if (!c.input_dim_set) c.train.model.input_dim = width;
  if (c.train.model.input_dim != width) {
    throw data_error("features have " + std::to_string(width) + " channels but input_dim is " +
                     std::to_string(c.train.model.input_dim));
  }
}

inline std::vector<training_sample> load_training_set(run_config& c) {
  if (c.annotations.empty()) throw config_error("train requires 'annotations'");
  const auto videos = load_config_features(c);
  resolve_input_dim(c, videos);
  const auto anns = io::read_annotations(c.annotations);
  std::vector<training_sample> data;
  for (const auto& v : videos) {
    annotation_set a;
    a.video_id = v.video_id;
    a.duration = v.duration();
    if (auto it = anns.find(v.video_id); it != anns.end()) a = it->second;
    for (auto& w : prepare_video(c, v, a)) {
      data.push_back(make_sample(std::move(w.features), std::move(w.annotations), c.train.model));
    }
  }
  return data;
}

// Trains (or resumes, when resume=true and the checkpoint exists), writing
// the checkpoint after every epoch and one log row per epoch to
// <output>/train_log.csv.
inline std::vector<epoch_log> cmd_train(run_config c) {
  const auto data = load_training_set(c);
  const fs::path log_path = fs::path(c.output) / "train_log.csv";
  const bool resuming = c.resume && fs::exists(c.checkpoint);

  std::unique_ptr<trainer> t;
  if (resuming) {
    const auto ck = io::read_checkpoint(c.checkpoint);
    if (!(ck.config.model == c.train.model)) {
      throw config_error("checkpoint " + c.checkpoint + " was trained with a different model");
    }
    t = std::make_unique<trainer>(ck);
    t->set_total_epochs(c.train.epochs);
    logging::info("train: resuming after epoch " + std::to_string(ck.epochs_completed));
  } else {
    t = std::make_unique<trainer>(c.train);
  }

  std::string log_text;
  if (resuming && fs::exists(log_path)) {
    log_text = io::read_text(log_path);
    // Drop rows past the checkpoint so the log matches the resumed state.
    std::string kept;
    std::size_t pos = 0, row = 0;
    while (pos < log_text.size()) {
      auto nl = log_text.find('\n', pos);
      if (nl == std::string::npos) nl = log_text.size() - 1;
      if (row <= t->epochs_completed()) kept += log_text.substr(pos, nl - pos + 1);
      pos = nl + 1;
      ++row;
    }
    log_text = kept;
  } else {
    log_text = io::kTrainLogHeader;
  }
  io::write_text(log_path, log_text);

  logging::info("train: " + std::to_string(data.size()) + " sequences, " +
                std::to_string(t->net().parameter_count()) + " parameters");
  return t->fit(data, [&](const epoch_log& e) {
    log_text += io::train_log_row(e);
    io::write_text(log_path, log_text);
    io::write_checkpoint(c.checkpoint, t->snapshot());
    logging::info("epoch " + std::to_string(e.epoch) + " lr " + io::format_double(e.lr) +
                  " loss " + io::format_double(e.total));
  });
}

// Runs `body(i)` for i in [0, n) on `workers` threads; the first exception
// is rethrown after all threads finish.
template <class F>
void parallel_for(std::size_t n, std::size_t workers, F body) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_guard;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_guard);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

// Proposals for every manifest video, written to <output>/proposals.json and
// <output>/proposals.csv.
inline io::proposal_map cmd_infer(run_config c) {
  const auto ck = io::read_checkpoint(c.checkpoint);
  const model net = model_from_checkpoint(ck);
  c.input_dim_set = true;
  c.train.model.input_dim = ck.config.model.input_dim;
  const auto videos = load_config_features(c);
  resolve_input_dim(c, videos);

  std::vector<std::vector<proposal>> results(videos.size());
  parallel_for(videos.size(), c.workers, [&](std::size_t i) {
    std::vector<video_features> windows;
    for (auto& w : prepare_video(c, videos[i], annotation_set{})) {
      windows.push_back(std::move(w.features));
    }
    results[i] = run_inference(net, windows, c.infer);
  });

  io::proposal_map out;
  for (std::size_t i = 0; i < videos.size(); ++i) out[videos[i].video_id] = std::move(results[i]);
  const fs::path dir = c.output;
  io::write_proposals_json(dir / "proposals.json", out);
  io::write_proposals_csv(dir / "proposals.csv", out);
  logging::info("infer: wrote proposals for " + std::to_string(out.size()) + " videos");
  return out;
}

// Metrics of a proposal file against annotations; writes
// <output>/eval_report.json and <output>/ar_curve.csv and prints a summary.
inline eval_report cmd_eval(const run_config& c, std::ostream& summary = std::cout) {
  if (c.annotations.empty()) throw config_error("eval requires 'annotations'");
  auto proposals = io::read_proposals(c.proposals_path());
  auto gts = io::to_ground_truth(io::read_annotations(c.annotations));
  if (c.with_map) {
    // Proposals carry no class: score them class-agnostically.
    bool labelled = false;
    for (const auto& [id, list] : proposals) {
      for (const auto& p : list) labelled = labelled || !p.label.empty();
    }
    if (!labelled) {
      for (auto& [id, list] : gts) {
        for (auto& g : list) g.label = "action";
      }
      for (auto& [id, list] : proposals) {
        for (auto& p : list) p.label = "action";
      }
    }
  }
  const auto report = evaluate(proposals, gts, c.report_an, c.max_an, c.thresholds, c.with_map,
                               c.thresholds);
  const fs::path dir = c.output;
  io::write_report(dir / "eval_report.json", report);
  io::write_ar_curve_csv(dir / "ar_curve.csv", report);
  const auto pct = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * v;
    return s.str();
  };
  for (const auto& [an, v] : report.ar_at_an) summary << "AR@" << an << " " << pct(v) << "\n";
  summary << "AUC " << pct(report.auc) << "\n";
  if (c.with_map) {
    for (const auto& [t, v] : report.map_at_tiou) {
      summary << "mAP@" << io::format_double(t) << " " << pct(v) << "\n";
    }
    summary << "average mAP " << pct(report.average_map) << "\n";
  }
  return report;
}

}  // namespace bcnet
