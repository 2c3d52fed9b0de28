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

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include "afd/pipeline.hpp"
#include "test_support.hpp"

namespace afd {
namespace {

using testing::TempDir;
namespace fs = std::filesystem;

// Small enough to run every stage in a few seconds.
RunConfig tiny_config() {
  RunConfig c;
  c.seed = 21;
  c.synth.normal_count = 10;
  c.synth.abnormal_count = 10;
  c.synth.duration_s = 0.5;
  c.spectrogram.n_fft = 256;
  c.spectrogram.hop = 128;
  c.spectrogram.n_mels = 32;
  c.spectrogram.image_size = {16, 16};
  c.train.epochs = 2;
  c.train.batch_size = 8;
  c.png_samples = 2;
  return c;
}

std::size_t count_files(const fs::path& dir, const std::string& ext) {
  if (!fs::exists(dir)) return 0;
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) n += e.path().extension() == ext;
  return n;
}

std::size_t count_lines(const fs::path& p) {
  const auto text = testing::slurp(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(AFD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(RunConfig, JsonRoundTrip) {
  auto c = tiny_config();
  c.machines = {Machine::kValve, Machine::kFan};
  c.snr_levels_db = {6};
  c.channel = ChannelPolicy::average();
  c.fractions = {0.6, 0.2, 0.2};
  const nlohmann::json j = c;
  EXPECT_EQ(nlohmann::json(j.get<RunConfig>()), j);
  auto bad = j;
  bad["learning_rate"] = 0.1;
  EXPECT_THROW(bad.get<RunConfig>(), ConfigError);
}

TEST(RunConfig, Validation) {
  auto c = tiny_config();
  c.threshold = 1.5;
  EXPECT_THROW(validate(c), ConfigError);
  c = tiny_config();
  c.spectrogram.f_max = 12000;
  EXPECT_THROW(validate(c), ConfigError);
  c = tiny_config();
  c.machines.clear();
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Pipeline, EndToEndOnSynthTree) {
  TempDir dir("run");
  const auto c = tiny_config();
  const auto out = run_all(c, dir.path());
  EXPECT_EQ(out.exit_code, kExitOk);
  EXPECT_EQ(out.training.cells.size(), 12u);
  EXPECT_EQ(out.evaluation.reports.size(), 12u);
  EXPECT_EQ(count_files(dir / "checkpoints", ".afdm"), 12u);
  EXPECT_EQ(count_files(dir / "histories", ".csv"), 12u);
  EXPECT_EQ(count_lines(dir / "histories/-6_dB_fan.csv"), 1u + c.train.epochs);
  EXPECT_EQ(count_lines(dir / "metrics.csv"), 13u);
  EXPECT_EQ(count_files(dir / "png", ".png"), 2u);
  EXPECT_TRUE(fs::exists(dir / "figures/6_dB_valve_accuracy.svg"));
  EXPECT_TRUE(fs::exists(dir / "figures/confusion_0_dB_pump.svg"));
  EXPECT_TRUE(fs::exists(dir / "run_config.json"));
  const auto m = load_manifest(dir / "manifest.json");
  EXPECT_EQ(count_files(dir / "features", ".afdf"), m.entries.size());
  EXPECT_EQ(count_lines(dir / "feature_hashes.tsv"), m.entries.size());
  EXPECT_TRUE(check_manifest(m).empty());
  // 8 normal vs 8 abnormal train clips per cell: nothing to augment.
  for (const auto& e : m.entries) EXPECT_FALSE(e.is_augmented());
  EXPECT_EQ(nlohmann::json::parse(testing::slurp(dir / "run_config.json")), nlohmann::json(c));
}

TEST(Pipeline, PrepareIsIdempotent) {
  TempDir data("data"), a("prep"), b("prep");
  auto c = tiny_config();
  c.synth.abnormal_count = 5;
  c.snr_levels_db = {0};
  c.machines = {Machine::kPump};
  run_synth(c, data.path());
  const auto ra = run_prepare(c, data.path(), a.path());
  c.workers = 1;
  const auto rb = run_prepare(c, data.path(), b.path());
  EXPECT_EQ(ra.feature_hashes, rb.feature_hashes);
  EXPECT_EQ(ra.manifest, rb.manifest);
  EXPECT_EQ(testing::slurp(a / "manifest.json"), testing::slurp(b / "manifest.json"));
  // 5 abnormal clips split 5/0/0 (half shares round down), so 8 normal vs 5
  // abnormal in train: three augmented clips, rendered to disk.
  std::size_t augmented = 0;
  for (const auto& e : ra.manifest.entries) {
    if (!e.is_augmented()) continue;
    ++augmented;
    EXPECT_TRUE(fs::exists(a / e.path)) << e.path;
  }
  EXPECT_EQ(augmented, 3u);
}

TEST(Pipeline, MissingCheckpointIsDataError) {
  TempDir data("data"), prep("prep"), models("models"), eval("eval");
  auto c = tiny_config();
  c.machines = {Machine::kSlider};
  c.snr_levels_db = {6, -6};
  run_synth(c, data.path());
  run_prepare(c, data.path(), prep.path());
  run_train(c, prep.path(), models.path());
  fs::remove(models / "checkpoints/-6_dB_slider.afdm");
  try {
    run_eval(c, prep.path(), models.path(), eval.path());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("-6_dB_slider"), std::string::npos) << e.what();
  }
}

TEST(Pipeline, SingleClassTestSplitReportsUndefined) {
  TempDir dir("run");
  auto c = tiny_config();
  c.machines = {Machine::kFan};
  c.snr_levels_db = {6};
  c.synth.abnormal_count = 2;  // too few to split: all abnormal clips train
  const auto out = run_all(c, dir.path());
  EXPECT_EQ(out.exit_code, kExitData);
  EXPECT_EQ(out.evaluation.single_class_cells(), std::vector<std::string>{"6_dB_fan"});
  ASSERT_EQ(out.evaluation.reports.size(), 1u);
  EXPECT_FALSE(out.evaluation.reports[0].auc);
  EXPECT_NE(testing::slurp(dir / "metrics.csv").find("undefined"), std::string::npos);
}

TEST(Pipeline, ReadsMimiiArchiveNaming) {
  TempDir data("data"), prep("prep");
  auto c = tiny_config();
  c.machines = {Machine::kValve};
  c.snr_levels_db = {-6};
  const auto synth_root = data / "synth";
  run_synth(c, synth_root);
  // Archive layout: the SNR directory carries the machine name.
  fs::rename(synth_root / "-6_dB", data / "-6_dB_valve");
  fs::remove(synth_root);
  const auto r = run_prepare(c, data.path(), prep.path());
  EXPECT_EQ(r.manifest.entries.size(), 20u);
  EXPECT_EQ(r.manifest.entries.front().path.rfind("-6_dB_valve/valve/", 0), 0u);
}

TEST(Cli, ExitCodes) {
  TempDir dir("cli");
  EXPECT_EQ(run_cli("gradcheck --out " + dir.path().string() + " --run-name ok"), kExitOk);
  EXPECT_TRUE(fs::exists(dir / "ok/gradcheck.txt"));
  EXPECT_EQ(run_cli("gradcheck --corrupt head.fc.weight --out " + dir.path().string() + " --run-name bad"),
            kExitVerification);
  testing::spit(dir / "bad.json", "{\"epochz\": 3}");
  EXPECT_EQ(run_cli("run --config " + (dir / "bad.json").string() + " --out " + dir.path().string()), kExitConfig);
  EXPECT_EQ(run_cli("prepare --root " + (dir / "nowhere").string() + " --out " + dir.path().string()), kExitData);
  EXPECT_EQ(run_cli("train --epochs 0 --out " + dir.path().string()), kExitConfig);
  EXPECT_EQ(run_cli("frobnicate"), kExitConfig);
  EXPECT_EQ(run_cli("--help"), kExitOk);
}

}  // namespace
}  // namespace afd
