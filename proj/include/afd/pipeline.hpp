/*
 * Copyright 2026 The AFD Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// End-to-end pipeline shared by the CLI and the acceptance suite:
// synth -> prepare (split, balance, featurize) -> train (one model per
// machine and SNR) -> eval.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "afd/audio.hpp"
#include "afd/augment.hpp"
#include "afd/binary_io.hpp"
#include "afd/dataset.hpp"
#include "afd/errors.hpp"
#include "afd/features.hpp"
#include "afd/gradcheck.hpp"
#include "afd/metrics.hpp"
#include "afd/model.hpp"
#include "afd/parallel.hpp"
#include "afd/svg.hpp"
#include "afd/train.hpp"
#include "json.hpp"

namespace afd {

enum ExitCode : int {
  kExitOk = 0,
  kExitUnexpected = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitDivergence = 4,
  kExitVerification = 5,
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string root;      // dataset root; empty: synthesize into <run>/data
  std::string manifest;  // prepare: manifest to use instead of scanning root
  std::string prepared;  // train/eval: output directory of prepare
  std::string models;    // eval: output directory of train
  std::string out = "runs";
  std::string run_name;  // empty: <command>-<UTC timestamp>
  std::vector<Machine> machines = {kMachines.begin(), kMachines.end()};
  std::vector<int> snr_levels_db = {-6, 0, 6};
  SynthConfig synth;
  int sample_rate = 16000;
  SpectrogramParams spectrogram;
  ModelConfig model;
  TrainConfig train;
  AugmentRanges augment;
  SplitFractions fractions;
  ChannelPolicy channel;
  double threshold = 0.5;
  int png_samples = 8;
  unsigned workers = 0;
  GradcheckOptions gradcheck;
};

inline void validate(const RunConfig& c) {
  if (c.machines.empty()) throw ConfigError("no machines selected");
  if (c.snr_levels_db.empty()) throw ConfigError("no SNR levels selected");
  validate(c.spectrogram, c.sample_rate);
  validate(c.train);
  validate(c.fractions);
  if (!(c.threshold >= 0.0 && c.threshold <= 1.0)) throw ConfigError("threshold must be in [0, 1]");
  if (c.png_samples < 0) throw ConfigError("png sample count must be >= 0");
  if (c.channel.channel < 0) throw ConfigError("channel index must be >= 0");
  for (const auto* r : {&c.augment.noise_snr_db, &c.augment.shift_seconds, &c.augment.semitones, &c.augment.speed}) {
    if (!(r->lo <= r->hi)) throw ConfigError("augmentation range has lo > hi");
  }
  if (c.augment.speed.lo < c.augment.speed_bounds.min || c.augment.speed.hi > c.augment.speed_bounds.max) {
    throw ConfigError("speed range outside speed bounds");
  }
  block_shapes(c.model);
}

// Model input follows the feature image size.
inline ModelConfig effective_model(const RunConfig& c) {
  ModelConfig m = c.model;
  m.input_height = static_cast<int>(c.spectrogram.image_size.height);
  m.input_width = static_cast<int>(c.spectrogram.image_size.width);
  return m;
}

inline SynthConfig effective_synth(const RunConfig& c) {
  SynthConfig s = c.synth;
  s.seed = detail::derive_seed(c.seed, "synth");
  s.snr_levels_db = c.snr_levels_db;
  s.workers = c.workers;
  s.machines.clear();
  for (Machine m : c.machines) {
    auto it = std::find_if(c.synth.machines.begin(), c.synth.machines.end(),
                           [&](const MachineRecipe& r) { return r.machine == m; });
    s.machines.push_back(it != c.synth.machines.end() ? *it : default_recipe(m));
  }
  return s;
}

// ---------------------------------------------------------------------------
// RunConfig JSON

inline void to_json(nlohmann::json& j, const ChannelPolicy& p) {
  j = nlohmann::json{{"mode", p.kind == ChannelPolicy::Kind::kAverage ? "average" : "select"},
                     {"channel", p.channel}};
}

inline void from_json(const nlohmann::json& j, ChannelPolicy& p) {
  const auto mode = j.value("mode", std::string("select"));
  if (mode == "average") {
    p = ChannelPolicy::average();
  } else if (mode == "select") {
    p = ChannelPolicy::select(j.value("channel", 0));
  } else {
    throw ConfigError("unknown channel mode: " + mode);
  }
}

inline void to_json(nlohmann::json& j, const GradcheckOptions& g) {
  j = nlohmann::json{{"eps", g.eps},       {"tolerance", g.tolerance}, {"floor", g.floor},
                     {"batch", g.batch},   {"height", g.height},       {"width", g.width},
                     {"corrupt_tensor", g.corrupt_tensor}, {"corrupt_scale", g.corrupt_scale}};
}

inline void from_json(const nlohmann::json& j, GradcheckOptions& g) {
  g.eps = j.value("eps", g.eps);
  g.tolerance = j.value("tolerance", g.tolerance);
  g.floor = j.value("floor", g.floor);
  g.batch = j.value("batch", g.batch);
  g.height = j.value("height", g.height);
  g.width = j.value("width", g.width);
  g.corrupt_tensor = j.value("corrupt_tensor", g.corrupt_tensor);
  g.corrupt_scale = j.value("corrupt_scale", g.corrupt_scale);
}

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  nlohmann::json machines = nlohmann::json::array();
  for (Machine m : c.machines) machines.push_back(to_string(m));
  nlohmann::json synth = c.synth;
  synth.erase("seed");  // derived from the run seed
  synth.erase("snr_levels_db");
  nlohmann::json train = c.train;
  train.erase("seed");
  nlohmann::json model = c.model;
  model.erase("input");  // follows spectrogram.image_size
  j = nlohmann::json{{"seed", c.seed},
                     {"root", c.root},
                     {"manifest", c.manifest},
                     {"prepared", c.prepared},
                     {"models", c.models},
                     {"out", c.out},
                     {"run_name", c.run_name},
                     {"machines", machines},
                     {"snr_levels_db", c.snr_levels_db},
                     {"synth", synth},
                     {"sample_rate", c.sample_rate},
                     {"spectrogram", c.spectrogram},
                     {"model", model},
                     {"train", train},
                     {"augment", c.augment},
                     {"split_fractions", c.fractions},
                     {"channel", c.channel},
                     {"threshold", c.threshold},
                     {"png_samples", c.png_samples},
                     {"workers", c.workers},
                     {"gradcheck", c.gradcheck}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  static const std::set<std::string> known = {
      "seed",     "root",  "manifest", "prepared", "models",    "out",         "run_name",
      "machines", "snr_levels_db", "synth", "sample_rate", "spectrogram", "model", "train", "augment",
      "split_fractions", "channel", "threshold", "png_samples", "workers", "gradcheck"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown config key: " + key);
  }
  c.seed = j.value("seed", c.seed);
  c.root = j.value("root", c.root);
  c.manifest = j.value("manifest", c.manifest);
  c.prepared = j.value("prepared", c.prepared);
  c.models = j.value("models", c.models);
  c.out = j.value("out", c.out);
  c.run_name = j.value("run_name", c.run_name);
  if (j.contains("machines")) {
    c.machines.clear();
    for (const auto& m : j["machines"]) c.machines.push_back(parse_machine(m.get<std::string>()));
  }
  if (j.contains("snr_levels_db")) c.snr_levels_db = j["snr_levels_db"].get<std::vector<int>>();
  if (j.contains("synth")) from_json(j["synth"], c.synth);
  c.sample_rate = j.value("sample_rate", c.sample_rate);
  if (j.contains("spectrogram")) from_json(j["spectrogram"], c.spectrogram);
  if (j.contains("model")) from_json(j["model"], c.model);
  if (j.contains("train")) from_json(j["train"], c.train);
  if (j.contains("augment")) from_json(j["augment"], c.augment);
  if (j.contains("split_fractions")) from_json(j["split_fractions"], c.fractions);
  if (j.contains("channel")) from_json(j["channel"], c.channel);
  c.threshold = j.value("threshold", c.threshold);
  c.png_samples = j.value("png_samples", c.png_samples);
  c.workers = j.value("workers", c.workers);
  if (j.contains("gradcheck")) from_json(j["gradcheck"], c.gradcheck);
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  try {
    return nlohmann::json::parse(in).get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Run directories and logging

using Log = std::function<void(const std::string&)>;

inline void log_line(const Log& log, const std::string& s) {
  if (log) log(s);
}

inline std::filesystem::path make_run_dir(const RunConfig& c, const std::string& command) {
  namespace fs = std::filesystem;
  std::string name = c.run_name;
  if (name.empty()) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << command << '-' << std::put_time(&tm, "%Y%m%d-%H%M%S");
    name = os.str();
    fs::path dir = fs::path(c.out) / name;
    for (int k = 2; fs::exists(dir); ++k) dir = fs::path(c.out) / (name + "-" + std::to_string(k));
    fs::create_directories(dir);
    return dir;
  }
  const fs::path dir = fs::path(c.out) / name;
  fs::create_directories(dir);
  return dir;
}

inline void write_run_config(const RunConfig& c, const std::filesystem::path& run_dir) {
  svg::write_text(run_dir / "run_config.json", nlohmann::json(c).dump(2) + "\n");
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Cells: one model per (machine, snr)

struct Cell {
  Machine machine = Machine::kFan;
  int snr_db = 0;

  std::string key() const { return snr_dir_name(snr_db) + "_" + std::string(to_string(machine)); }
  auto operator<=>(const Cell&) const = default;
};

inline std::vector<Cell> manifest_cells(const Manifest& m) {
  std::set<Cell> cells;
  for (const auto& e : m.entries) cells.insert({e.machine, e.snr_db});
  std::vector<Cell> out(cells.begin(), cells.end());
  std::sort(out.begin(), out.end(), [](const Cell& a, const Cell& b) {
    return std::tie(a.snr_db, a.machine) < std::tie(b.snr_db, b.machine);
  });
  return out;
}

inline Manifest filter_manifest(const Manifest& m, const RunConfig& c) {
  Manifest out;
  out.seed = m.seed;
  for (const auto& e : m.entries) {
    if (std::find(c.machines.begin(), c.machines.end(), e.machine) == c.machines.end()) continue;
    if (std::find(c.snr_levels_db.begin(), c.snr_levels_db.end(), e.snr_db) == c.snr_levels_db.end()) continue;
    out.entries.push_back(e);
  }
  return out;
}

inline std::filesystem::path feature_path(const std::filesystem::path& prepared, const Entry& e) {
  return prepared / "features" / std::filesystem::path(e.path).replace_extension(".afdf");
}

// ---------------------------------------------------------------------------
// synth

inline Manifest run_synth(const RunConfig& c, const std::filesystem::path& data_root, const Log& log = {}) {
  validate(c);
  const auto sc = effective_synth(c);
  log_line(log, "synthesizing " + std::to_string(sc.machines.size() * sc.snr_levels_db.size() *
                                                 static_cast<std::size_t>(sc.normal_count + sc.abnormal_count)) +
                    " clips into " + data_root.string());
  return synth_dataset(sc, data_root);
}

// ---------------------------------------------------------------------------
// prepare

struct PrepareResult {
  Manifest manifest;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, std::uint64_t>> feature_hashes;  // manifest order
};

inline AudioClip load_entry_clip(const RunConfig& c, const Entry& e, const std::filesystem::path& data_root) {
  AudioClip clip = render_entry(e, data_root, c.channel, c.augment.speed_bounds);
  if (clip.sample_rate() != c.sample_rate) clip = resample(clip, c.sample_rate);
  return clip;
}

// Split, balance the train split, render augmented clips and cache one
// feature image per manifest entry under run_dir.
inline PrepareResult run_prepare(const RunConfig& c, const std::filesystem::path& data_root,
                                 const std::filesystem::path& run_dir, const Log& log = {}) {
  namespace fs = std::filesystem;
  validate(c);
  Manifest scanned = c.manifest.empty() ? scan_mimii(data_root) : load_manifest(c.manifest);
  for (const auto& e : scanned.entries) {
    if (e.is_augmented() || e.split != Split::kUnassigned) {
      throw DataError("prepare expects an unsplit manifest of original clips");
    }
  }
  scanned = filter_manifest(scanned, c);
  if (scanned.entries.empty()) throw DataError("no clips found for the selected machines and SNR levels");

  PrepareResult r;
  Manifest m = split(scanned, detail::derive_seed(c.seed, "split"), c.fractions, &r.warnings);
  m = balance_by_augmentation(m, detail::derive_seed(c.seed, "balance"), c.augment);
  if (auto problems = check_manifest(m, c.fractions); !problems.empty()) {
    throw DataError("prepared manifest violates dataset invariants: " + problems.front());
  }
  for (const auto& w : r.warnings) log_line(log, "warning: " + w);

  const MelFilterbank bank(c.spectrogram, c.sample_rate);
  std::vector<std::uint64_t> hashes(m.entries.size());
  std::mutex log_mutex;
  std::size_t done = 0;
  parallel_for(m.entries.size(), c.workers ? c.workers : default_workers(), [&](std::size_t i) {
    const Entry& e = m.entries[i];
    const AudioClip clip = load_entry_clip(c, e, data_root);
    if (e.is_augmented()) {
      const auto wav = run_dir / e.path;
      fs::create_directories(wav.parent_path());
      write_wav(clip, wav);
    }
    const FeatureImage image = featurize(clip, c.spectrogram, bank);
    const auto fp = feature_path(run_dir, e);
    fs::create_directories(fp.parent_path());
    write_feature(image, fp);
    const std::string bytes = read_text(fp);
    hashes[i] = detail::fnv1a(std::string_view(bytes));
    if (static_cast<int>(i) < c.png_samples) {
      const auto png = run_dir / "png" / fs::path(e.path).replace_extension(".png");
      fs::create_directories(png.parent_path());
      export_png(image, png);
    }
    std::lock_guard lock(log_mutex);
    if (++done % 500 == 0) log_line(log, "featurized " + std::to_string(done) + "/" + std::to_string(m.entries.size()));
  });

  std::ostringstream tsv;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const auto rel = feature_path("", m.entries[i]).generic_string();
    tsv << hex64(hashes[i]) << '\t' << rel << '\n';
    r.feature_hashes.emplace_back(rel, hashes[i]);
  }
  svg::write_text(run_dir / "feature_hashes.tsv", tsv.str());
  save_manifest(m, run_dir / "manifest.json");
  std::size_t augmented = 0;
  for (const auto& e : m.entries) augmented += e.is_augmented();
  log_line(log, "prepared " + std::to_string(m.entries.size()) + " entries (" + std::to_string(augmented) +
                    " augmented) in " + run_dir.string());
  r.manifest = std::move(m);
  return r;
}

// ---------------------------------------------------------------------------
// train

inline LabeledImages load_split_images(const Manifest& m, const std::filesystem::path& prepared, const Cell& cell,
                                       Split split) {
  LabeledImages out;
  for (const auto& e : m.entries) {
    if (e.machine != cell.machine || e.snr_db != cell.snr_db || e.split != split) continue;
    out.add(read_feature(feature_path(prepared, e)), e.label);
  }
  return out;
}

struct CellTraining {
  Cell cell;
  bool diverged = false;
  std::string message;
  int best_epoch = 0;
  TrainHistory history;
};

struct TrainSummary {
  std::vector<CellTraining> cells;
  bool any_diverged() const {
    return std::any_of(cells.begin(), cells.end(), [](const CellTraining& c) { return c.diverged; });
  }
};

inline std::filesystem::path checkpoint_path(const std::filesystem::path& dir, const Cell& cell) {
  return dir / "checkpoints" / (cell.key() + ".afdm");
}

inline void write_curves(const std::filesystem::path& dir, const Cell& cell, const TrainHistory& h) {
  std::vector<double> ta, va, tl, vl;
  for (const auto& r : h) {
    ta.push_back(r.train_accuracy), va.push_back(r.val_accuracy);
    tl.push_back(r.train_loss), vl.push_back(r.val_loss);
  }
  const std::string title = std::string(to_string(cell.machine)) + " " + std::to_string(cell.snr_db) + " dB";
  svg::write_text(dir / "figures" / (cell.key() + "_accuracy.svg"),
                  svg::line_chart(title + " accuracy", "epoch", "accuracy",
                                  {{"train", ta, "#1f77b4"}, {"validation", va, "#ff7f0e"}}));
  svg::write_text(dir / "figures" / (cell.key() + "_loss.svg"),
                  svg::line_chart(title + " loss", "epoch", "loss",
                                  {{"train", tl, "#1f77b4"}, {"validation", vl, "#ff7f0e"}}));
}

// Trains one model per cell. Divergence is recorded per cell; other cells
// still run.
inline TrainSummary run_train(const RunConfig& c, const std::filesystem::path& prepared,
                              const std::filesystem::path& run_dir, const Log& log = {}) {
  validate(c);
  const Manifest m = filter_manifest(load_manifest(prepared / "manifest.json"), c);
  const auto cells = manifest_cells(m);
  if (cells.empty()) throw DataError("prepared manifest has no cells for the selected machines and SNR levels");
  const ModelConfig mc = effective_model(c);

  TrainSummary summary;
  summary.cells.resize(cells.size());
  std::mutex log_mutex;
  parallel_for(cells.size(), c.workers ? c.workers : default_workers(), [&](std::size_t i) {
    const Cell& cell = cells[i];
    auto& out = summary.cells[i];
    out.cell = cell;
    const auto train_set = load_split_images(m, prepared, cell, Split::kTrain);
    const auto val_set = load_split_images(m, prepared, cell, Split::kVal);
    TrainConfig tc = c.train;
    tc.seed = detail::derive_seed(c.seed, "train:" + cell.key());
    try {
      auto model = DenseNet<float>::build(mc, detail::derive_seed(c.seed, "model:" + cell.key()));
      auto result = train(std::move(model), train_set, val_set, tc);
      out.best_epoch = result.best_epoch;
      out.history = result.history;
      std::filesystem::create_directories(run_dir / "checkpoints");
      save_checkpoint(result.model, checkpoint_path(run_dir, cell));
      svg::write_text(run_dir / "histories" / (cell.key() + ".csv"), history_csv(result.history));
      write_curves(run_dir, cell, result.history);
      const auto& best = result.history[static_cast<std::size_t>(result.best_epoch - 1)];
      std::ostringstream os;
      os << std::fixed << std::setprecision(5) << "trained " << cell.key() << ": best epoch " << result.best_epoch
         << ", val acc " << best.val_accuracy << ", val loss " << best.val_loss;
      out.message = os.str();
    } catch (const DivergenceError& e) {
      out.diverged = true;
      out.message = "diverged " + cell.key() + ": " + e.what();
    }
    std::lock_guard lock(log_mutex);
    log_line(log, out.message);
  });

  nlohmann::json js = nlohmann::json::array();
  for (const auto& t : summary.cells) {
    js.push_back({{"cell", t.cell.key()},
                  {"machine", to_string(t.cell.machine)},
                  {"snr_db", t.cell.snr_db},
                  {"diverged", t.diverged},
                  {"best_epoch", t.best_epoch},
                  {"message", t.message}});
  }
  svg::write_text(run_dir / "train_summary.json", js.dump(2) + "\n");
  return summary;
}

// ---------------------------------------------------------------------------
// eval

struct EvalResult {
  std::vector<MetricsReport> reports;
  bool any_undefined() const {
    return std::any_of(reports.begin(), reports.end(), [](const MetricsReport& r) { return r.has_undefined(); });
  }
  // Test splits holding one class only: a data problem, reported with exit 3.
  // Undefined metrics caused by one-class predictions are reported but are
  // not errors.
  std::vector<std::string> single_class_cells() const {
    std::vector<std::string> out;
    for (const auto& r : reports) {
      if (r.cm.tp + r.cm.fn == 0 || r.cm.tn + r.cm.fp == 0) out.push_back(std::to_string(r.snr_db) + "_dB_" + r.machine);
    }
    return out;
  }
};

inline std::string metrics_csv(const std::vector<MetricsReport>& reports) {
  std::string out = std::string(kReportCsvHeader) + "\n";
  for (const auto& r : reports) out += report_csv_row(r) + "\n";
  return out;
}

inline EvalResult run_eval(const RunConfig& c, const std::filesystem::path& prepared,
                           const std::filesystem::path& models, const std::filesystem::path& run_dir,
                           const Log& log = {}) {
  validate(c);
  const Manifest m = filter_manifest(load_manifest(prepared / "manifest.json"), c);
  const auto cells = manifest_cells(m);
  if (cells.empty()) throw DataError("prepared manifest has no cells for the selected machines and SNR levels");
  for (const auto& cell : cells) {
    const auto path = checkpoint_path(models, cell);
    if (!std::filesystem::exists(path)) throw DataError("missing checkpoint for " + cell.key() + ": " + path.string());
  }
  EvalResult result;
  std::string confusion;
  for (const auto& cell : cells) {
    const auto test = load_split_images(m, prepared, cell, Split::kTest);
    if (test.size() == 0) throw DataError("empty test split for " + cell.key());
    auto model = load_checkpoint<float>(checkpoint_path(models, cell));
    const auto p = model.predict_batch(test.pixels, static_cast<int>(test.size()));
    const std::vector<double> probs(p.begin(), p.end());
    auto report = make_report(std::string(to_string(cell.machine)), cell.snr_db, probs, test.labels, c.threshold);
    std::ostringstream pred;
    pred << "path,label,probability,predicted\n" << std::setprecision(9);
    std::size_t k = 0;
    for (const auto& e : m.entries) {
      if (e.machine != cell.machine || e.snr_db != cell.snr_db || e.split != Split::kTest) continue;
      pred << e.path << ',' << to_string(e.label) << ',' << probs[k] << ','
           << (probs[k] >= c.threshold ? "abnormal" : "normal") << '\n';
      ++k;
    }
    svg::write_text(run_dir / "predictions" / (cell.key() + ".csv"), pred.str());
    svg::write_text(run_dir / "figures" / ("confusion_" + cell.key() + ".svg"),
                    svg::confusion_heatmap(std::string(to_string(cell.machine)) + " " + std::to_string(cell.snr_db) +
                                               " dB",
                                           report.cm));
    confusion += confusion_text(report) + "\n";
    log_line(log, "evaluated " + cell.key() + ": accuracy " + format_metric(report.accuracy) +
                      (report.has_undefined() ? " (undefined metrics present)" : ""));
    result.reports.push_back(std::move(report));
  }
  svg::write_text(run_dir / "metrics.csv", metrics_csv(result.reports));
  svg::write_text(run_dir / "metrics.json", nlohmann::json(result.reports).dump(2) + "\n");
  svg::write_text(run_dir / "confusion.txt", confusion);
  return result;
}

// ---------------------------------------------------------------------------
// run: every stage in one directory

struct RunOutcome {
  TrainSummary training;
  EvalResult evaluation;
  int exit_code = kExitOk;
};

inline RunOutcome run_all(const RunConfig& c, const std::filesystem::path& run_dir, const Log& log = {}) {
  validate(c);
  write_run_config(c, run_dir);
  std::filesystem::path data_root = c.root;
  if (c.root.empty() && c.manifest.empty()) {
    data_root = run_dir / "data";
    save_manifest(run_synth(c, data_root, log), run_dir / "synth_manifest.json");
  }
  run_prepare(c, data_root, run_dir, log);
  RunOutcome out;
  out.training = run_train(c, run_dir, run_dir, log);
  if (out.training.any_diverged()) {
    out.exit_code = kExitDivergence;
    return out;
  }
  out.evaluation = run_eval(c, run_dir, run_dir, run_dir, log);
  if (!out.evaluation.single_class_cells().empty()) out.exit_code = kExitData;
  return out;
}

}  // namespace afd
