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

// Manifests over MIMII-layout trees (snr/machine/id/{normal,abnormal}/*.wav),
// stratified splitting, train-only class balancing by augmentation, and a
// synthetic machine-sound generator.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "afd/audio.hpp"
#include "afd/augment.hpp"
#include "afd/binary_io.hpp"
#include "afd/errors.hpp"
#include "afd/labels.hpp"
#include "afd/parallel.hpp"
#include "afd/random.hpp"
#include "json.hpp"

namespace afd {

enum class Machine { kFan, kPump, kSlider, kValve };

inline constexpr std::array<Machine, 4> kMachines = {Machine::kFan, Machine::kPump, Machine::kSlider,
                                                     Machine::kValve};

inline std::string_view to_string(Machine m) {
  switch (m) {
    case Machine::kFan: return "fan";
    case Machine::kPump: return "pump";
    case Machine::kSlider: return "slider";
    case Machine::kValve: return "valve";
  }
  return "fan";
}

inline std::optional<Machine> try_parse_machine(std::string_view s) {
  for (Machine m : kMachines) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

inline Machine parse_machine(std::string_view s) {
  if (auto m = try_parse_machine(s)) return *m;
  throw ConfigError("unknown machine type: " + std::string(s));
}

enum class Split { kUnassigned, kTrain, kVal, kTest };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::kUnassigned: return "unassigned";
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "unassigned";
}

inline Split parse_split(std::string_view s) {
  for (Split v : {Split::kUnassigned, Split::kTrain, Split::kVal, Split::kTest}) {
    if (to_string(v) == s) return v;
  }
  throw DataError("unknown split: " + std::string(s));
}

struct Augmentation {
  AugmentSpec spec;
  std::string source;  // path of the original train clip

  bool operator==(const Augmentation&) const = default;
};

// Original entries are relative to the dataset root; augmented entries are
// relative to the working directory they were materialized in.
struct Entry {
  std::string path;
  Machine machine = Machine::kFan;
  Label label = Label::kNormal;
  int snr_db = 0;
  Split split = Split::kUnassigned;
  std::optional<Augmentation> augmentation;

  bool is_augmented() const { return augmentation.has_value(); }
  bool operator==(const Entry&) const = default;
};

struct Manifest {
  std::uint64_t seed = 0;
  std::vector<Entry> entries;

  bool operator==(const Manifest&) const = default;
};

inline std::string snr_dir_name(int snr_db) { return std::to_string(snr_db) + "_dB"; }

// "-6_dB", "6_dB", "+6dB" and MIMII archive names such as "-6_dB_fan".
inline std::optional<std::pair<int, std::string>> parse_snr_dir(const std::string& name) {
  static const std::regex re(R"(^([+-]?\d+)_?dB(?:_([a-z]+))?$)");
  std::smatch m;
  if (!std::regex_match(name, m, re)) return std::nullopt;
  return std::make_pair(std::stoi(m[1].str()), m[2].matched ? m[2].str() : std::string());
}

// ---------------------------------------------------------------------------
// Scanning

inline Manifest scan_mimii(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw DataError("dataset root is not a directory: " + root.string());
  std::vector<std::string> paths;
  for (const auto& item : fs::recursive_directory_iterator(root)) {
    if (!item.is_regular_file()) continue;
    const auto name = item.path().filename().string();
    if (name.empty() || name.front() == '.') continue;
    if (item.path().extension() != ".wav") continue;
    paths.push_back(item.path().lexically_relative(root).generic_string());
  }
  std::sort(paths.begin(), paths.end());

  Manifest out;
  out.entries.reserve(paths.size());
  for (const auto& rel : paths) {
    std::vector<std::string> parts;
    for (const auto& p : fs::path(rel)) parts.push_back(p.string());
    auto bad = [&](const std::string& why) {
      return DataError("unrecognized dataset layout at " + (root / rel).string() + " (" + why +
                       "; expected snr/machine/id/{normal,abnormal}/*.wav)");
    };
    if (parts.size() != 5) throw bad("wrong depth");
    const auto snr = parse_snr_dir(parts[0]);
    if (!snr) throw bad("bad SNR directory '" + parts[0] + "'");
    const auto machine = try_parse_machine(parts[1]);
    if (!machine) throw bad("bad machine directory '" + parts[1] + "'");
    if (!snr->second.empty() && snr->second != parts[1]) throw bad("SNR directory names another machine");
    if (parts[3] != "normal" && parts[3] != "abnormal") throw bad("bad label directory '" + parts[3] + "'");
    Entry e;
    e.path = rel;
    e.machine = *machine;
    e.label = parse_label(parts[3]);
    e.snr_db = snr->first;
    out.entries.push_back(std::move(e));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
  bool operator==(const SplitFractions&) const = default;
};

inline void validate(const SplitFractions& f) {
  if (f.train < 0 || f.val < 0 || f.test < 0) throw ConfigError("split fractions must be non-negative");
  if (std::abs(f.train + f.val + f.test - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
}

// Nearest integer, halves rounded down: keeps every part within one entry of
// its exact share.
inline std::size_t split_share(std::size_t n, double fraction) {
  const double x = static_cast<double>(n) * fraction;
  return static_cast<std::size_t>(std::ceil(x - 0.5 - 1e-9));
}

struct SplitCounts {
  std::size_t train = 0, val = 0, test = 0;
  bool operator==(const SplitCounts&) const = default;
};

inline SplitCounts split_counts(std::size_t n, const SplitFractions& f) {
  if (n < 3) return {n, 0, 0};
  SplitCounts c;
  c.val = split_share(n, f.val);
  c.test = split_share(n, f.test);
  c.train = n - c.val - c.test;
  return c;
}

// Stratum key: one (snr, machine, label) cell. Models are per (machine, snr),
// so each cell is split on its own.
using StratumKey = std::tuple<int, Machine, Label>;

inline std::string describe(const StratumKey& k) {
  return snr_dir_name(std::get<0>(k)) + "/" + std::string(to_string(std::get<1>(k))) + "/" +
         std::string(to_string(std::get<2>(k)));
}

inline Manifest split(const Manifest& in, std::uint64_t seed, const SplitFractions& fractions = {},
                      std::vector<std::string>* warnings = nullptr) {
  validate(fractions);
  std::map<StratumKey, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < in.entries.size(); ++i) {
    const auto& e = in.entries[i];
    if (e.is_augmented()) throw ConfigError("split expects a manifest without augmented entries");
    strata[{e.snr_db, e.machine, e.label}].push_back(i);
  }
  Manifest out = in;
  out.seed = seed;
  for (auto& [key, idx] : strata) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return in.entries[a].path < in.entries[b].path;
    });
    Rng rng(detail::derive_seed(seed, "split:" + describe(key)));
    shuffle(idx, rng);
    const auto c = split_counts(idx.size(), fractions);
    if (idx.size() < 3 && warnings) {
      warnings->push_back("stratum " + describe(key) + " has " + std::to_string(idx.size()) +
                          " entries; all assigned to train");
    }
    for (std::size_t r = 0; r < idx.size(); ++r) {
      out.entries[idx[r]].split = r < c.train ? Split::kTrain : (r < c.train + c.val ? Split::kVal : Split::kTest);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Balancing

inline constexpr double kBalanceTolerance = 0.02;

inline std::string augmented_path(const Entry& source, std::size_t ordinal, AugmentKind kind) {
  const std::filesystem::path p(source.path);
  std::ostringstream os;
  os << "augmented/" << snr_dir_name(source.snr_db) << '/' << to_string(source.machine) << '/'
     << to_string(source.label) << '/' << p.stem().string() << '_' << std::setw(5) << std::setfill('0') << ordinal
     << '_' << to_string(kind) << ".wav";
  return os.str();
}

// For every (snr, machine) cell, adds augmented copies of minority-class
// train clips until the train minority is within 2% of the train majority.
// Transforms cycle in the fixed order of kAugmentKinds; sources cycle over
// the minority clips in path order. Entries are planned only; audio is
// produced by render_entry.
inline Manifest balance_by_augmentation(const Manifest& in, std::uint64_t seed,
                                        const AugmentRanges& ranges = {}) {
  std::map<std::pair<int, Machine>, std::array<std::vector<std::size_t>, 2>> cells;
  for (std::size_t i = 0; i < in.entries.size(); ++i) {
    const auto& e = in.entries[i];
    if (e.split == Split::kUnassigned) throw ConfigError("balance_by_augmentation requires assigned splits");
    if (e.is_augmented()) throw ConfigError("manifest is already augmented");
    if (e.split != Split::kTrain) continue;
    cells[{e.snr_db, e.machine}][static_cast<int>(e.label)].push_back(i);
  }
  Manifest out = in;
  for (auto& [cell, by_label] : cells) {
    const auto n_normal = by_label[0].size(), n_abnormal = by_label[1].size();
    const std::size_t majority = std::max(n_normal, n_abnormal);
    const std::size_t minority = std::min(n_normal, n_abnormal);
    if (static_cast<double>(majority - minority) <= kBalanceTolerance * static_cast<double>(majority)) continue;
    const std::string where = snr_dir_name(cell.first) + "/" + std::string(to_string(cell.second));
    if (minority == 0) throw DataError("cannot balance " + where + ": minority class has no train clips");
    auto sources = by_label[n_normal < n_abnormal ? 0 : 1];
    std::sort(sources.begin(), sources.end(),
              [&](std::size_t a, std::size_t b) { return in.entries[a].path < in.entries[b].path; });
    const std::size_t needed = majority - minority;
    for (std::size_t k = 0; k < needed; ++k) {
      const Entry& src = in.entries[sources[k % sources.size()]];
      const AugmentKind kind = kAugmentKinds[k % kAugmentKinds.size()];
      Rng rng(detail::derive_seed(seed, "augment:" + src.path + ":" + std::to_string(k)));
      Entry e = src;
      e.augmentation = Augmentation{sample_augment_spec(kind, ranges, rng), src.path};
      e.path = augmented_path(src, k, kind);
      out.entries.push_back(std::move(e));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hygiene

// Returns one message per violated invariant; empty means clean.
inline std::vector<std::string> check_manifest(const Manifest& m, const SplitFractions& fractions = {}) {
  std::vector<std::string> problems;
  std::map<StratumKey, std::array<std::size_t, 4>> counts;
  std::map<std::string, Split> original_split;
  std::set<std::string> paths;
  for (const auto& e : m.entries) {
    if (!paths.insert(e.path).second) problems.push_back("duplicate path " + e.path);
    if (e.split == Split::kUnassigned) problems.push_back("unassigned split for " + e.path);
    if (e.is_augmented()) {
      if (e.split != Split::kTrain) problems.push_back("augmented entry outside train: " + e.path);
      continue;
    }
    original_split[e.path] = e.split;
    counts[{e.snr_db, e.machine, e.label}][static_cast<int>(e.split)]++;
  }
  for (const auto& e : m.entries) {
    if (!e.is_augmented()) continue;
    auto it = original_split.find(e.augmentation->source);
    if (it == original_split.end()) {
      problems.push_back("augmented entry " + e.path + " has unknown source " + e.augmentation->source);
    } else if (it->second != Split::kTrain) {
      problems.push_back("augmented entry " + e.path + " derives from a non-train clip");
    }
  }
  for (const auto& [key, c] : counts) {
    const std::size_t n = c[1] + c[2] + c[3];
    if (n < 3) {
      if (c[1] != n) problems.push_back("small stratum " + describe(key) + " not fully in train");
      continue;
    }
    const double dn = static_cast<double>(n);
    const std::array<std::pair<double, std::size_t>, 3> parts = {
        std::pair{fractions.train, c[1]}, std::pair{fractions.val, c[2]}, std::pair{fractions.test, c[3]}};
    for (std::size_t s = 0; s < parts.size(); ++s) {
      if (std::abs(static_cast<double>(parts[s].second) - parts[s].first * dn) > 1.0 + 1e-9) {
        problems.push_back("stratum " + describe(key) + " " + std::string(to_string(static_cast<Split>(s + 1))) +
                           " count " + std::to_string(parts[s].second) + " is not within 1 of its share of " +
                           std::to_string(n));
      }
    }
  }
  return problems;
}

struct ClassCounts {
  std::size_t normal = 0, abnormal = 0;
};

inline ClassCounts count_labels(const Manifest& m, std::optional<Split> split = std::nullopt,
                                std::optional<Machine> machine = std::nullopt,
                                std::optional<int> snr_db = std::nullopt) {
  ClassCounts c;
  for (const auto& e : m.entries) {
    if (split && e.split != *split) continue;
    if (machine && e.machine != *machine) continue;
    if (snr_db && e.snr_db != *snr_db) continue;
    (e.label == Label::kAbnormal ? c.abnormal : c.normal)++;
  }
  return c;
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::json& j, const Entry& e) {
  j = nlohmann::json{{"path", e.path},
                     {"machine", to_string(e.machine)},
                     {"label", to_string(e.label)},
                     {"snr_db", e.snr_db},
                     {"split", to_string(e.split)}};
  if (e.augmentation) {
    j["provenance"] = {{"type", "augmented"}, {"source", e.augmentation->source}, {"augment", e.augmentation->spec}};
  } else {
    j["provenance"] = {{"type", "original"}};
  }
}

inline void from_json(const nlohmann::json& j, Entry& e) {
  e.path = j.at("path").get<std::string>();
  e.machine = parse_machine(j.at("machine").get<std::string>());
  e.label = parse_label(j.at("label").get<std::string>());
  e.snr_db = j.at("snr_db").get<int>();
  e.split = parse_split(j.at("split").get<std::string>());
  const auto& p = j.at("provenance");
  const auto type = p.at("type").get<std::string>();
  if (type == "augmented") {
    e.augmentation = Augmentation{p.at("augment").get<AugmentSpec>(), p.at("source").get<std::string>()};
  } else if (type == "original") {
    e.augmentation.reset();
  } else {
    throw DataError("unknown provenance type: " + type);
  }
}

inline void to_json(nlohmann::json& j, const Manifest& m) {
  j = nlohmann::json{{"seed", m.seed}, {"entries", m.entries}};
}

inline void from_json(const nlohmann::json& j, Manifest& m) {
  m.seed = j.at("seed").get<std::uint64_t>();
  m.entries = j.at("entries").get<std::vector<Entry>>();
}

inline std::string manifest_text(const Manifest& m) { return nlohmann::json(m).dump(2) + "\n"; }

inline void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest: " + path.string());
  out << manifest_text(m);
  if (!out) throw DataError("failed writing manifest: " + path.string());
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest: " + path.string());
  try {
    return nlohmann::json::parse(in).get<Manifest>();
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError("malformed manifest " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Synthetic machine sounds

// Abnormal-only artifacts. A zero field disables that artifact.
struct FaultRecipe {
  double impulse_rate_hz = 0.0;
  double impulse_level = 8.0;       // click peak scale relative to the tonal rms
  double sideband_offset_hz = 0.0;
  double sideband_level = 0.6;      // relative to each harmonic
  double jitter = 0.0;              // relative frequency deviation (rms)

  bool operator==(const FaultRecipe&) const = default;
};

struct MachineRecipe {
  Machine machine = Machine::kFan;
  double fundamental_hz = 120.0;
  int harmonics = 8;
  double modulation_hz = 0.5;
  double modulation_depth = 0.15;
  double noise_floor = 0.05;  // pink noise rms relative to the tonal rms
  FaultRecipe fault;

  bool operator==(const MachineRecipe&) const = default;
};

inline void validate(const MachineRecipe& r, int sample_rate) {
  if (!(r.fundamental_hz > 0.0)) throw ConfigError("fundamental must be positive");
  if (r.harmonics < 1) throw ConfigError("harmonic count must be >= 1");
  if (r.fundamental_hz * r.harmonics >= 0.5 * sample_rate) throw ConfigError("harmonics exceed Nyquist");
  if (r.modulation_hz < 0.0 || r.modulation_depth < 0.0 || r.modulation_depth >= 1.0) {
    throw ConfigError("invalid amplitude modulation");
  }
  if (r.noise_floor < 0.0) throw ConfigError("noise floor must be non-negative");
  const auto& f = r.fault;
  if (f.impulse_rate_hz < 0.0 || f.sideband_offset_hz < 0.0 || f.jitter < 0.0 || f.impulse_level < 0.0 ||
      f.sideband_level < 0.0) {
    throw ConfigError("fault parameters must be non-negative");
  }
  const bool impulses = f.impulse_rate_hz > 0.0 && f.impulse_level > 0.0;
  const bool sidebands = f.sideband_offset_hz > 0.0 && f.sideband_level > 0.0;
  if (!impulses && !sidebands && !(f.jitter > 0.0)) {
    throw ConfigError("recipe for " + std::string(to_string(r.machine)) + " has no fault artifact");
  }
  if (sidebands && f.sideband_offset_hz >= r.fundamental_hz) {
    throw ConfigError("sideband offset must be below the fundamental");
  }
}

inline MachineRecipe default_recipe(Machine m) {
  MachineRecipe r;
  r.machine = m;
  switch (m) {
    case Machine::kFan:
      r.fundamental_hz = 120.0, r.harmonics = 8, r.modulation_hz = 0.5;
      r.fault.sideband_offset_hz = 45.0;
      break;
    case Machine::kPump:
      r.fundamental_hz = 90.0, r.harmonics = 10, r.modulation_hz = 1.0;
      r.fault.jitter = 0.04, r.fault.impulse_rate_hz = 3.0, r.fault.impulse_level = 6.0;
      break;
    case Machine::kSlider:
      r.fundamental_hz = 200.0, r.harmonics = 6, r.modulation_hz = 2.0;
      r.fault.impulse_rate_hz = 8.0, r.fault.impulse_level = 6.0;
      break;
    case Machine::kValve:
      r.fundamental_hz = 60.0, r.harmonics = 12, r.modulation_hz = 0.3;
      r.fault.impulse_rate_hz = 5.0;
      break;
  }
  return r;
}

// Unit-rms pink noise (Kellet's refined 1/f filter over white noise).
inline std::vector<double> pink_noise(std::size_t n, Rng& rng) {
  std::vector<double> out(n);
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = standard_normal(rng);
    b0 = 0.99886 * b0 + w * 0.0555179;
    b1 = 0.99332 * b1 + w * 0.0750759;
    b2 = 0.96900 * b2 + w * 0.1538520;
    b3 = 0.86650 * b3 + w * 0.3104856;
    b4 = 0.55000 * b4 + w * 0.5329522;
    b5 = -0.7616 * b5 - w * 0.0168980;
    out[i] = b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362;
    b6 = w * 0.115926;
  }
  double ss = 0;
  for (double v : out) ss += v * v;
  const double r = n ? std::sqrt(ss / static_cast<double>(n)) : 1.0;
  if (r > 0) {
    for (double& v : out) v /= r;
  }
  return out;
}

inline constexpr double kSynthRms = 0.05;

// Normal: harmonic stack (amplitudes 1/k, random phases) with slow amplitude
// modulation and a pink noise floor. Abnormal adds the recipe's faults.
// Output rms is kSynthRms.
inline AudioClip synth_clip(const MachineRecipe& recipe, Label condition, std::uint64_t seed,
                            double duration_s = 2.0, int sample_rate = 16000) {
  validate(recipe, sample_rate);
  if (!(duration_s > 0.0)) throw ConfigError("duration must be positive");
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  if (n == 0) throw ConfigError("duration shorter than one sample");
  const bool abnormal = condition == Label::kAbnormal;
  const auto& fault = recipe.fault;
  const double sr = sample_rate, two_pi = 2.0 * std::numbers::pi;

  Rng rng(seed);
  std::vector<double> phase0(static_cast<std::size_t>(recipe.harmonics));
  for (auto& p : phase0) p = uniform(rng, 0.0, two_pi);
  const double am_phase = uniform(rng, 0.0, two_pi);
  const double click_offset = uniform01(rng);
  Rng jitter_rng(detail::derive_seed(seed, "jitter"));
  Rng click_rng(detail::derive_seed(seed, "clicks"));
  Rng floor_rng(detail::derive_seed(seed, "floor"));

  // Frequency deviation: gaussian control points every 10 ms, linearly
  // interpolated and clipped at 2.5 sigma.
  std::vector<double> deviation(n, 0.0);
  if (abnormal && fault.jitter > 0.0) {
    const auto step = static_cast<std::size_t>(std::max(1.0, 0.01 * sr));
    std::vector<double> ctrl(n / step + 2);
    for (auto& c : ctrl) c = std::clamp(standard_normal(jitter_rng), -2.5, 2.5);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = i / step;
      const double t = static_cast<double>(i % step) / static_cast<double>(step);
      deviation[i] = fault.jitter * ((1.0 - t) * ctrl[k] + t * ctrl[k + 1]);
    }
  }

  const bool sidebands = abnormal && fault.sideband_offset_hz > 0.0 && fault.sideband_level > 0.0;
  std::vector<double> tonal(n, 0.0);
  for (int k = 1; k <= recipe.harmonics; ++k) {
    const double amp = 1.0 / k;
    const double f = k * recipe.fundamental_hz;
    double phase = phase0[static_cast<std::size_t>(k - 1)];
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / sr;
      double v = std::sin(phase);
      if (sidebands) {
        const double off = two_pi * fault.sideband_offset_hz * t;
        v += fault.sideband_level * (std::sin(phase - off) + std::sin(phase + off + 0.5 * k));
      }
      tonal[i] += amp * v;
      phase += two_pi * f * (1.0 + deviation[i]) / sr;
      if (phase > two_pi) phase -= two_pi;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    tonal[i] *= 1.0 + recipe.modulation_depth * std::sin(two_pi * recipe.modulation_hz * t + am_phase);
  }
  double tonal_ss = 0;
  for (double v : tonal) tonal_ss += v * v;
  const double tonal_rms = std::sqrt(tonal_ss / static_cast<double>(n));

  std::vector<double> x = tonal;
  if (recipe.noise_floor > 0.0) {
    const auto floor = pink_noise(n, floor_rng);
    for (std::size_t i = 0; i < n; ++i) x[i] += recipe.noise_floor * tonal_rms * floor[i];
  }
  if (abnormal && fault.impulse_rate_hz > 0.0 && fault.impulse_level > 0.0) {
    // Decaying broadband bursts, one per period, peak near impulse_level.
    const double period = 1.0 / fault.impulse_rate_hz;
    const double tau = 0.002 * sr;
    const auto len = static_cast<std::size_t>(8.0 * tau);
    for (double t0 = click_offset * period; t0 < duration_s; t0 += period) {
      const auto start = static_cast<std::size_t>(t0 * sr);
      const double a = fault.impulse_level * tonal_rms * uniform(click_rng, 0.8, 1.2);
      for (std::size_t m = 0; m < len && start + m < n; ++m) {
        const double env = std::exp(-static_cast<double>(m) / tau);
        const double carrier = m == 0 ? 1.0 : std::clamp(standard_normal(click_rng) / 2.5, -1.0, 1.0);
        x[start + m] += a * env * carrier;
      }
    }
  }
  double ss = 0;
  for (double v : x) ss += v * v;
  const double g = kSynthRms / std::sqrt(ss / static_cast<double>(n));
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(g * x[i]);
  return AudioClip(std::move(out), sample_rate);
}

// Factory noise bed: pink noise through a one-pole low-pass plus mains hum.
inline AudioClip noise_bed(std::size_t frames, int sample_rate, std::uint64_t seed) {
  Rng rng(seed);
  auto pink = pink_noise(frames, rng);
  const double sr = sample_rate;
  const double a = std::exp(-2.0 * std::numbers::pi * 4000.0 / sr);
  const double hum_phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  std::vector<float> out(frames);
  double y = 0.0;
  for (std::size_t i = 0; i < frames; ++i) {
    y = (1.0 - a) * pink[i] + a * y;
    const double t = static_cast<double>(i) / sr;
    out[i] = static_cast<float>(0.05 * (y + 0.2 * std::sin(2.0 * std::numbers::pi * 50.0 * t + hum_phase)));
  }
  return AudioClip(std::move(out), sample_rate);
}

struct SynthConfig {
  std::vector<MachineRecipe> machines = {default_recipe(Machine::kFan), default_recipe(Machine::kPump),
                                         default_recipe(Machine::kSlider), default_recipe(Machine::kValve)};
  int normal_count = 60;
  int abnormal_count = 20;
  double duration_s = 2.0;
  int sample_rate = 16000;
  std::vector<int> snr_levels_db = {-6, 0, 6};
  std::uint64_t seed = 0;
  unsigned workers = 0;  // 0: hardware concurrency; does not affect output

  bool operator==(const SynthConfig&) const = default;
};

inline void validate(const SynthConfig& c) {
  if (c.machines.empty()) throw ConfigError("synth config lists no machines");
  std::set<Machine> seen;
  for (const auto& r : c.machines) {
    validate(r, c.sample_rate);
    if (!seen.insert(r.machine).second) throw ConfigError("duplicate machine recipe");
  }
  if (c.normal_count <= 0 || c.abnormal_count <= 0) throw ConfigError("clip counts must be > 0");
  if (!(c.duration_s > 0.0)) throw ConfigError("duration must be > 0");
  if (c.sample_rate <= 0) throw ConfigError("sample rate must be > 0");
  if (c.snr_levels_db.empty()) throw ConfigError("no SNR levels");
  std::set<int> snrs(c.snr_levels_db.begin(), c.snr_levels_db.end());
  if (snrs.size() != c.snr_levels_db.size()) throw ConfigError("duplicate SNR level");
}

inline std::string synth_relative_path(Machine m, Label label, int snr_db, int index) {
  std::ostringstream os;
  os << snr_dir_name(snr_db) << '/' << to_string(m) << "/id_00/" << to_string(label) << '/' << std::setw(8)
     << std::setfill('0') << index << ".wav";
  return os.str();
}

struct SynthSample {
  Entry entry;
  AudioClip clean;
  SnrMix mix;
};

// One file of the synthetic tree. The clean clip depends on (machine, label,
// index) only, so every SNR variant mixes the same recording.
inline SynthSample synth_sample(const SynthConfig& c, const MachineRecipe& recipe, Label label, int index,
                                int snr_db) {
  const std::string id = std::string(to_string(recipe.machine)) + "/" + std::string(to_string(label)) + "/" +
                         std::to_string(index);
  SynthSample s;
  s.clean = synth_clip(recipe, label, detail::derive_seed(c.seed, "clip:" + id), c.duration_s, c.sample_rate);
  const auto bed = noise_bed(s.clean.frames(), c.sample_rate,
                             detail::derive_seed(c.seed, "bed:" + id + ":" + std::to_string(snr_db)));
  s.mix = mix_components(s.clean, bed, snr_db);
  s.entry.path = synth_relative_path(recipe.machine, label, snr_db, index);
  s.entry.machine = recipe.machine;
  s.entry.label = label;
  s.entry.snr_db = snr_db;
  return s;
}

// Writes the MIMII-layout tree under root and returns its manifest (splits
// unassigned, entries in path order).
inline Manifest synth_dataset(const SynthConfig& c, const std::filesystem::path& root) {
  validate(c);
  struct Job {
    const MachineRecipe* recipe;
    Label label;
    int index;
    int snr;
  };
  std::vector<Job> jobs;
  for (int snr : c.snr_levels_db) {
    for (const auto& r : c.machines) {
      for (Label label : {Label::kNormal, Label::kAbnormal}) {
        const int count = label == Label::kNormal ? c.normal_count : c.abnormal_count;
        for (int i = 0; i < count; ++i) jobs.push_back({&r, label, i, snr});
      }
    }
  }
  std::vector<Entry> entries(jobs.size());
  parallel_for(jobs.size(), c.workers ? c.workers : default_workers(), [&](std::size_t j) {
    const auto& job = jobs[j];
    auto s = synth_sample(c, *job.recipe, job.label, job.index, job.snr);
    const auto path = root / s.entry.path;
    std::filesystem::create_directories(path.parent_path());
    write_wav(s.mix.mixture, path);
    entries[j] = std::move(s.entry);
  });
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.path < b.path; });
  Manifest m;
  m.seed = c.seed;
  m.entries = std::move(entries);
  return m;
}

// ---------------------------------------------------------------------------
// Audio for manifest entries

// Original entries are read from data_root; augmented entries are rendered
// from their train source.
inline AudioClip render_entry(const Entry& e, const std::filesystem::path& data_root, ChannelPolicy policy = {},
                              const SpeedBounds& bounds = {}) {
  if (!e.is_augmented()) return to_mono(read_wav(data_root / e.path), policy);
  const auto source = to_mono(read_wav(data_root / e.augmentation->source), policy);
  return apply_augment(source, e.augmentation->spec, bounds);
}

// ---------------------------------------------------------------------------
// Synth config JSON

inline void to_json(nlohmann::json& j, const FaultRecipe& f) {
  j = nlohmann::json{{"impulse_rate_hz", f.impulse_rate_hz},
                     {"impulse_level", f.impulse_level},
                     {"sideband_offset_hz", f.sideband_offset_hz},
                     {"sideband_level", f.sideband_level},
                     {"jitter", f.jitter}};
}

inline void from_json(const nlohmann::json& j, FaultRecipe& f) {
  f.impulse_rate_hz = j.value("impulse_rate_hz", f.impulse_rate_hz);
  f.impulse_level = j.value("impulse_level", f.impulse_level);
  f.sideband_offset_hz = j.value("sideband_offset_hz", f.sideband_offset_hz);
  f.sideband_level = j.value("sideband_level", f.sideband_level);
  f.jitter = j.value("jitter", f.jitter);
}

inline void to_json(nlohmann::json& j, const MachineRecipe& r) {
  j = nlohmann::json{{"machine", to_string(r.machine)},
                     {"fundamental_hz", r.fundamental_hz},
                     {"harmonics", r.harmonics},
                     {"modulation_hz", r.modulation_hz},
                     {"modulation_depth", r.modulation_depth},
                     {"noise_floor", r.noise_floor},
                     {"fault", r.fault}};
}

inline void from_json(const nlohmann::json& j, MachineRecipe& r) {
  r = default_recipe(parse_machine(j.at("machine").get<std::string>()));
  r.fundamental_hz = j.value("fundamental_hz", r.fundamental_hz);
  r.harmonics = j.value("harmonics", r.harmonics);
  r.modulation_hz = j.value("modulation_hz", r.modulation_hz);
  r.modulation_depth = j.value("modulation_depth", r.modulation_depth);
  r.noise_floor = j.value("noise_floor", r.noise_floor);
  if (j.contains("fault")) r.fault = j.at("fault").get<FaultRecipe>();
}

inline void to_json(nlohmann::json& j, const SynthConfig& c) {
  j = nlohmann::json{{"machines", c.machines},         {"normal_count", c.normal_count},
                     {"abnormal_count", c.abnormal_count}, {"duration_s", c.duration_s},
                     {"sample_rate", c.sample_rate},   {"snr_levels_db", c.snr_levels_db},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, SynthConfig& c) {
  if (j.contains("machines")) c.machines = j.at("machines").get<std::vector<MachineRecipe>>();
  c.normal_count = j.value("normal_count", c.normal_count);
  c.abnormal_count = j.value("abnormal_count", c.abnormal_count);
  c.duration_s = j.value("duration_s", c.duration_s);
  c.sample_rate = j.value("sample_rate", c.sample_rate);
  if (j.contains("snr_levels_db")) c.snr_levels_db = j.at("snr_levels_db").get<std::vector<int>>();
  c.seed = j.value("seed", c.seed);
}

inline void to_json(nlohmann::json& j, const SplitFractions& f) {
  j = nlohmann::json::array({f.train, f.val, f.test});
}

inline void from_json(const nlohmann::json& j, SplitFractions& f) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("split fractions must be [train, val, test]");
  f = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace afd
