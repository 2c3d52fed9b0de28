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

// afd: command-line front end for the acoustic fault detection pipeline.
//
//   afd synth     write a synthetic MIMII-layout tree
//   afd prepare   split, balance and featurize a tree
//   afd train     one model per (machine, SNR) cell
//   afd eval      metrics CSV/JSON, confusion matrices
//   afd run       all of the above in one run directory
//   afd gradcheck finite-difference check of the backward pass

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "afd/pipeline.hpp"

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Flag values as strings so that "-6,0,6" and "average" parse uniformly.
struct Flags {
  std::string config, root, manifest, prepared, models, out, run_name, machines, snr, channel, image_size;
  std::uint64_t seed = 0;
  int epochs = 0, batch_size = 0, normal_count = 0, abnormal_count = 0, sample_rate = 0, n_fft = 0, hop = 0,
      n_mels = 0, png_samples = 0;
  unsigned workers = 0;
  double lr = 0, momentum = 0, duration = 0, threshold = 0, tolerance = 0, corrupt_scale = 0;
  std::string corrupt;
  std::vector<CLI::Option*> given;
};

void add_flags(CLI::App& cmd, Flags& f) {
  cmd.add_option("--config", f.config, "RunConfig JSON document");
  cmd.add_option("--seed", f.seed, "master seed");
  cmd.add_option("--root", f.root, "dataset root (snr/machine/id/{normal,abnormal}/*.wav)");
  cmd.add_option("--manifest", f.manifest, "manifest JSON to prepare instead of scanning --root");
  cmd.add_option("--prepared", f.prepared, "directory written by prepare");
  cmd.add_option("--models", f.models, "directory written by train");
  cmd.add_option("--out", f.out, "parent directory for run directories");
  cmd.add_option("--run-name", f.run_name, "fixed run directory name instead of a timestamp");
  cmd.add_option("--machines", f.machines, "comma list of fan,pump,slider,valve");
  cmd.add_option("--snr", f.snr, "comma list of SNR levels in dB, e.g. -6,0,6")->allow_extra_args(false);
  cmd.add_option("--epochs", f.epochs, "training epochs");
  cmd.add_option("--batch-size", f.batch_size, "minibatch size");
  cmd.add_option("--lr", f.lr, "learning rate");
  cmd.add_option("--momentum", f.momentum, "SGD momentum");
  cmd.add_option("--normal-count", f.normal_count, "synth: normal clips per machine and SNR");
  cmd.add_option("--abnormal-count", f.abnormal_count, "synth: abnormal clips per machine and SNR");
  cmd.add_option("--duration", f.duration, "synth: clip duration in seconds");
  cmd.add_option("--sample-rate", f.sample_rate, "analysis sample rate in Hz");
  cmd.add_option("--n-fft", f.n_fft, "STFT size");
  cmd.add_option("--hop", f.hop, "STFT hop");
  cmd.add_option("--n-mels", f.n_mels, "mel bands");
  cmd.add_option("--image-size", f.image_size, "feature image size HxW or N");
  cmd.add_option("--channel", f.channel, "multichannel policy: channel index or 'average'");
  cmd.add_option("--threshold", f.threshold, "abnormal decision threshold");
  cmd.add_option("--png-samples", f.png_samples, "prepare: PNG images for the first N entries");
  cmd.add_option("--workers", f.workers, "worker threads (0: all cores)");
  cmd.add_option("--tolerance", f.tolerance, "gradcheck: max relative error");
  cmd.add_option("--corrupt", f.corrupt, "gradcheck: scale the analytic gradient of this tensor");
  cmd.add_option("--corrupt-scale", f.corrupt_scale, "gradcheck: scale used by --corrupt");
}

bool given(const CLI::App& cmd, const std::string& name) { return cmd.get_option(name)->count() > 0; }

afd::RunConfig resolve_config(const CLI::App& cmd, const Flags& f) {
  afd::RunConfig c = f.config.empty() ? afd::RunConfig{} : afd::load_run_config(f.config);
  if (given(cmd, "--seed")) c.seed = f.seed;
  if (given(cmd, "--root")) c.root = f.root;
  if (given(cmd, "--manifest")) c.manifest = f.manifest;
  if (given(cmd, "--prepared")) c.prepared = f.prepared;
  if (given(cmd, "--models")) c.models = f.models;
  if (given(cmd, "--out")) c.out = f.out;
  if (given(cmd, "--run-name")) c.run_name = f.run_name;
  if (given(cmd, "--machines")) {
    c.machines.clear();
    for (const auto& m : split_list(f.machines)) c.machines.push_back(afd::parse_machine(m));
  }
  if (given(cmd, "--snr")) {
    c.snr_levels_db.clear();
    for (const auto& s : split_list(f.snr)) {
      try {
        std::size_t used = 0;
        c.snr_levels_db.push_back(std::stoi(s, &used));
        if (used != s.size()) throw std::invalid_argument(s);
      } catch (const std::exception&) {
        throw afd::ConfigError("bad SNR level: " + s);
      }
    }
  }
  if (given(cmd, "--epochs")) c.train.epochs = f.epochs;
  if (given(cmd, "--batch-size")) c.train.batch_size = f.batch_size;
  if (given(cmd, "--lr")) c.train.learning_rate = f.lr;
  if (given(cmd, "--momentum")) c.train.momentum = f.momentum;
  if (given(cmd, "--normal-count")) c.synth.normal_count = f.normal_count;
  if (given(cmd, "--abnormal-count")) c.synth.abnormal_count = f.abnormal_count;
  if (given(cmd, "--duration")) c.synth.duration_s = f.duration;
  if (given(cmd, "--sample-rate")) c.sample_rate = f.sample_rate;
  if (given(cmd, "--n-fft")) c.spectrogram.n_fft = f.n_fft;
  if (given(cmd, "--hop")) c.spectrogram.hop = f.hop;
  if (given(cmd, "--n-mels")) c.spectrogram.n_mels = f.n_mels;
  if (given(cmd, "--image-size")) {
    const auto x = f.image_size.find('x');
    try {
      const auto h = std::stoul(f.image_size.substr(0, x));
      const auto w = x == std::string::npos ? h : std::stoul(f.image_size.substr(x + 1));
      c.spectrogram.image_size = {h, w};
    } catch (const std::exception&) {
      throw afd::ConfigError("bad image size: " + f.image_size);
    }
  }
  if (given(cmd, "--channel")) {
    if (f.channel == "average") {
      c.channel = afd::ChannelPolicy::average();
    } else {
      try {
        c.channel = afd::ChannelPolicy::select(std::stoi(f.channel));
      } catch (const std::exception&) {
        throw afd::ConfigError("bad channel policy: " + f.channel);
      }
    }
  }
  if (given(cmd, "--threshold")) c.threshold = f.threshold;
  if (given(cmd, "--png-samples")) c.png_samples = f.png_samples;
  if (given(cmd, "--workers")) c.workers = f.workers;
  if (given(cmd, "--tolerance")) c.gradcheck.tolerance = f.tolerance;
  if (given(cmd, "--corrupt")) c.gradcheck.corrupt_tensor = f.corrupt;
  if (given(cmd, "--corrupt-scale")) c.gradcheck.corrupt_scale = f.corrupt_scale;
  afd::validate(c);
  return c;
}

void log(const std::string& line) { std::cout << line << std::endl; }

std::filesystem::path require_dir(const std::string& value, const char* flag) {
  if (value.empty()) throw afd::ConfigError(std::string(flag) + " is required");
  if (!std::filesystem::is_directory(value)) throw afd::DataError(std::string(flag) + " is not a directory: " + value);
  return value;
}

int cmd_synth(const afd::RunConfig& c) {
  const auto dir = afd::make_run_dir(c, "synth");
  afd::write_run_config(c, dir);
  const std::filesystem::path root = c.root.empty() ? dir / "data" : std::filesystem::path(c.root);
  const auto m = afd::run_synth(c, root, log);
  afd::save_manifest(m, dir / "manifest.json");
  log("wrote " + std::to_string(m.entries.size()) + " clips; manifest " + (dir / "manifest.json").string());
  return afd::kExitOk;
}

int cmd_prepare(const afd::RunConfig& c) {
  if (c.root.empty()) throw afd::ConfigError("--root is required");
  const auto dir = afd::make_run_dir(c, "prepare");
  afd::write_run_config(c, dir);
  afd::run_prepare(c, c.root, dir, log);
  return afd::kExitOk;
}

int cmd_train(const afd::RunConfig& c) {
  const auto prepared = require_dir(c.prepared, "--prepared");
  const auto dir = afd::make_run_dir(c, "train");
  afd::write_run_config(c, dir);
  const auto summary = afd::run_train(c, prepared, dir, log);
  return summary.any_diverged() ? afd::kExitDivergence : afd::kExitOk;
}

// Exit 3 when a test split lacks a class; otherwise undefined metrics are a
// warning.
int report_undefined(const afd::EvalResult& result) {
  const auto cells = result.single_class_cells();
  if (!cells.empty()) {
    std::cerr << "error: single-class test split in";
    for (const auto& c : cells) std::cerr << ' ' << c;
    std::cerr << "; undefined metrics in metrics.csv\n";
    return afd::kExitData;
  }
  if (result.any_undefined()) std::cerr << "warning: some metrics are undefined (see metrics.csv)\n";
  return afd::kExitOk;
}

int cmd_eval(const afd::RunConfig& c) {
  const auto prepared = require_dir(c.prepared, "--prepared");
  const auto models = require_dir(c.models, "--models");
  const auto dir = afd::make_run_dir(c, "eval");
  afd::write_run_config(c, dir);
  const auto result = afd::run_eval(c, prepared, models, dir, log);
  std::cout << afd::metrics_csv(result.reports);
  return report_undefined(result);
}

int cmd_run(const afd::RunConfig& c) {
  const auto dir = afd::make_run_dir(c, "run");
  const auto outcome = afd::run_all(c, dir, log);
  std::cout << afd::metrics_csv(outcome.evaluation.reports);
  if (outcome.exit_code == afd::kExitOk || outcome.exit_code == afd::kExitData) report_undefined(outcome.evaluation);
  log("run directory: " + dir.string());
  return outcome.exit_code;
}

int cmd_gradcheck(const afd::RunConfig& c) {
  const auto dir = afd::make_run_dir(c, "gradcheck");
  afd::write_run_config(c, dir);
  afd::GradcheckOptions opt = c.gradcheck;
  opt.seed = c.seed;
  const auto report = afd::gradient_check(c.model, opt);
  std::ostringstream os;
  os << report.table() << "checked " << report.checked << " coordinates, skipped " << report.skipped
     << " at ReLU kinks\nmax relative error " << report.max_rel_error << " (tolerance " << opt.tolerance << ")\n";
  if (!report.passed) {
    os << "FAILED: worst coordinate " << report.worst.tensor << "[" << report.worst.index << "] analytic "
       << report.worst.analytic << " numeric " << report.worst.numeric << "\n";
  } else {
    os << "passed\n";
  }
  afd::svg::write_text(dir / "gradcheck.txt", os.str());
  std::cout << os.str();
  return report.passed ? afd::kExitOk : afd::kExitVerification;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acoustic fault detection from mel spectrograms with a densely connected CNN"};
  app.require_subcommand(1);
  Flags flags;
  struct Command {
    const char* name;
    const char* help;
    int (*fn)(const afd::RunConfig&);
    CLI::App* app = nullptr;
  };
  std::vector<Command> commands = {
      {"synth", "write a synthetic MIMII-layout dataset", cmd_synth},
      {"prepare", "split, balance by augmentation and featurize a dataset", cmd_prepare},
      {"train", "train one model per machine and SNR", cmd_train},
      {"eval", "evaluate trained models on the test split", cmd_eval},
      {"run", "synth (or scan --root), prepare, train and eval in one run directory", cmd_run},
      {"gradcheck", "finite-difference check of the analytic gradients", cmd_gradcheck},
  };
  for (auto& cmd : commands) {
    cmd.app = app.add_subcommand(cmd.name, cmd.help);
    add_flags(*cmd.app, flags);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? afd::kExitOk : afd::kExitConfig;
  }
  try {
    for (const auto& cmd : commands) {
      if (cmd.app->parsed()) return cmd.fn(resolve_config(*cmd.app, flags));
    }
  } catch (const afd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return afd::kExitConfig;
  } catch (const afd::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return afd::kExitData;
  } catch (const afd::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return afd::kExitDivergence;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return afd::kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return afd::kExitUnexpected;
  }
  return afd::kExitUnexpected;
}
