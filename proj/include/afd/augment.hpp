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

// The four class-balancing transforms (noise injection, time shift, pitch
// change, speed change) and SNR-controlled mixing.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "afd/audio.hpp"
#include "afd/errors.hpp"
#include "afd/random.hpp"
#include "json.hpp"

namespace afd {

// ---------------------------------------------------------------------------
// SNR mixing

struct SnrMix {
  AudioClip mixture;
  AudioClip scaled_noise;  // g * noise, truncated to the signal length
  double gain = 0.0;
};

// 20 * log10(rms(signal) / rms(noise)).
inline double snr_db(std::span<const float> signal, std::span<const float> noise) {
  return 20.0 * std::log10(rms(signal) / rms(noise));
}

// signal + g * noise with g = rms(signal) / (rms(noise) * 10^(snr_db / 20)),
// SNR taken over the whole clip.
inline SnrMix mix_components(const AudioClip& signal, const AudioClip& noise,
                             double snr_db) {
  if (signal.sample_rate() != noise.sample_rate()) {
    throw ConfigError("cannot mix clips with different sample rates (" +
                      std::to_string(signal.sample_rate()) + " vs " +
                      std::to_string(noise.sample_rate()) + ")");
  }
  if (signal.channels() != noise.channels()) {
    throw ConfigError("cannot mix clips with different channel counts");
  }
  if (noise.samples().size() < signal.samples().size()) {
    throw ConfigError("noise clip is shorter than the signal");
  }
  if (!std::isfinite(snr_db)) throw ConfigError("SNR must be finite");
  const auto noise_part = noise.samples().first(signal.samples().size());
  const double signal_rms = signal.empty() ? 0.0 : rms(signal);
  const double noise_rms = noise_part.empty() ? 0.0 : rms(noise_part);
  if (signal_rms == 0.0) throw UndefinedStatisticError("cannot set SNR: signal is silent");
  if (noise_rms == 0.0) throw UndefinedStatisticError("cannot set SNR: noise is silent");

  const double gain = signal_rms / (noise_rms * std::pow(10.0, snr_db / 20.0));
  std::vector<float> mixed(signal.samples().size());
  std::vector<float> scaled(mixed.size());
  for (std::size_t i = 0; i < mixed.size(); ++i) {
    scaled[i] = static_cast<float>(gain * noise_part[i]);
    mixed[i] = signal.samples()[i] + scaled[i];
  }
  return {AudioClip(std::move(mixed), signal.sample_rate(), signal.channels()),
          AudioClip(std::move(scaled), signal.sample_rate(), signal.channels()),
          gain};
}

inline AudioClip mix_at_snr(const AudioClip& signal, const AudioClip& noise,
                            double snr_db) {
  return mix_components(signal, noise, snr_db).mixture;
}

// ---------------------------------------------------------------------------
// Transforms

// Pass as noise_snr_db to make inject_noise an identity.
inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

inline AudioClip inject_noise(const AudioClip& clip, double noise_snr_db,
                              std::uint64_t seed) {
  if (noise_snr_db == kNoNoise) return clip;
  Rng rng(seed);
  std::vector<float> noise(clip.samples().size());
  for (float& n : noise) n = static_cast<float>(standard_normal(rng));
  return mix_at_snr(clip, AudioClip(std::move(noise), clip.sample_rate(), clip.channels()),
                    noise_snr_db);
}

enum class ShiftMode { kCircular, kZeroPad };

// Positive shifts move the audio to the right (later in time).
inline AudioClip time_shift(const AudioClip& clip, double shift_seconds,
                            ShiftMode mode = ShiftMode::kCircular) {
  if (!std::isfinite(shift_seconds)) throw ConfigError("shift must be finite");
  if (std::abs(shift_seconds) > clip.duration_seconds() + 1e-12) {
    throw ConfigError("shift of " + std::to_string(shift_seconds) +
                      " s exceeds clip duration " +
                      std::to_string(clip.duration_seconds()) + " s");
  }
  const auto frames = static_cast<std::ptrdiff_t>(clip.frames());
  const auto shift = static_cast<std::ptrdiff_t>(
      std::llround(shift_seconds * clip.sample_rate()));
  if (shift == 0 || frames == 0) return clip;
  const std::size_t ch = static_cast<std::size_t>(clip.channels());
  const auto src = clip.samples();
  std::vector<float> out(src.size(), 0.0f);
  for (std::ptrdiff_t f = 0; f < frames; ++f) {
    std::ptrdiff_t to = f + shift;
    if (mode == ShiftMode::kCircular) {
      to = ((to % frames) + frames) % frames;
    } else if (to < 0 || to >= frames) {
      continue;
    }
    for (std::size_t c = 0; c < ch; ++c) {
      out[static_cast<std::size_t>(to) * ch + c] = src[static_cast<std::size_t>(f) * ch + c];
    }
  }
  return AudioClip(std::move(out), clip.sample_rate(), clip.channels());
}

struct StretchOptions {
  int frame = 1024;  // Hann window length
  int hop = 256;     // synthesis hop (75% overlap)
  int tolerance = 128;  // max alignment offset searched per frame
};

// Waveform-similarity overlap-add: changes duration to `out_len` samples while
// keeping local frequency content. Each analysis frame is taken near its
// nominal position, nudged within +-tolerance to line up with the natural
// continuation of the previous frame.
inline std::vector<float> time_stretch(std::span<const float> input,
                                       std::size_t out_len,
                                       const StretchOptions& opts = {}) {
  if (out_len == 0) return {};
  if (input.empty()) return std::vector<float>(out_len, 0.0f);
  const int n = opts.frame;
  const int hs = opts.hop;
  const double ha = static_cast<double>(hs) * static_cast<double>(input.size()) /
                    static_cast<double>(out_len);
  const auto in_len = static_cast<std::ptrdiff_t>(input.size());
  auto sample = [&](std::ptrdiff_t i) -> double {
    return (i >= 0 && i < in_len) ? input[static_cast<std::size_t>(i)] : 0.0;
  };

  std::vector<double> window(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    window[static_cast<std::size_t>(i)] =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  }

  // Frames start half a window before the signal so the first output samples
  // are covered by full overlap.
  const std::ptrdiff_t lead = n / 2;
  std::vector<double> acc(out_len + static_cast<std::size_t>(n), 0.0);
  std::vector<double> norm(acc.size(), 0.0);
  std::ptrdiff_t prev = -lead;
  const auto frames = static_cast<std::ptrdiff_t>(out_len / static_cast<std::size_t>(hs)) + 3;
  for (std::ptrdiff_t m = 0; m < frames; ++m) {
    const std::ptrdiff_t out_pos = m * hs - lead;
    const auto nominal = static_cast<std::ptrdiff_t>(std::llround(m * ha)) - lead;
    std::ptrdiff_t best = nominal;
    if (m > 0) {
      const std::ptrdiff_t natural = prev + hs;
      double best_score = -std::numeric_limits<double>::infinity();
      for (int d = -opts.tolerance; d <= opts.tolerance; ++d) {
        const std::ptrdiff_t cand = nominal + d;
        double score = 0.0;
        // Correlate over the overlapping part of the window.
        for (int i = 0; i < n - hs; i += 2) {
          score += sample(cand + i) * sample(natural + i);
        }
        if (score > best_score) {
          best_score = score;
          best = cand;
        }
      }
    }
    prev = best;
    for (int i = 0; i < n; ++i) {
      const std::ptrdiff_t o = out_pos + i;
      if (o < 0 || o >= static_cast<std::ptrdiff_t>(out_len)) continue;
      const double w = window[static_cast<std::size_t>(i)];
      acc[static_cast<std::size_t>(o)] += w * sample(best + i);
      norm[static_cast<std::size_t>(o)] += w;
    }
  }
  std::vector<float> out(out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    out[i] = norm[i] > 1e-9 ? static_cast<float>(acc[i] / norm[i]) : 0.0f;
  }
  return out;
}

// Shifts pitch by `semitones` keeping the length: resample by 2^(s/12), then
// stretch back to the original length.
inline AudioClip pitch_shift(const AudioClip& clip, double semitones,
                             const ResampleOptions& resample_opts = {},
                             const StretchOptions& stretch_opts = {}) {
  if (!std::isfinite(semitones)) throw ConfigError("semitones must be finite");
  if (clip.channels() != 1) throw ConfigError("pitch_shift expects a mono clip");
  if (semitones == 0.0 || clip.empty()) return clip;
  const double factor = std::pow(2.0, semitones / 12.0);
  const auto squeezed = resample_by_ratio(clip.samples(), 1.0 / factor, resample_opts);
  return AudioClip(time_stretch(squeezed, clip.frames(), stretch_opts),
                   clip.sample_rate(), 1);
}

struct SpeedBounds {
  double min = 0.25;
  double max = 4.0;
};

// Resampled playback: duration scales by 1/factor, pitch by factor.
inline AudioClip speed_change(const AudioClip& clip, double factor,
                              SpeedBounds bounds = {},
                              const ResampleOptions& opts = {}) {
  if (!(factor >= bounds.min && factor <= bounds.max)) {
    throw ConfigError("speed factor " + std::to_string(factor) + " outside [" +
                      std::to_string(bounds.min) + ", " +
                      std::to_string(bounds.max) + "]");
  }
  if (clip.channels() != 1) throw ConfigError("speed_change expects a mono clip");
  return AudioClip(resample_by_ratio(clip.samples(), 1.0 / factor, opts),
                   clip.sample_rate(), 1);
}

// ---------------------------------------------------------------------------
// Augmentation specs

enum class AugmentKind { kNoiseInjection, kTimeShift, kPitchChange, kSpeedChange };

inline constexpr std::array<AugmentKind, 4> kAugmentKinds = {
    AugmentKind::kNoiseInjection, AugmentKind::kTimeShift,
    AugmentKind::kPitchChange, AugmentKind::kSpeedChange};

inline std::string_view to_string(AugmentKind kind) {
  switch (kind) {
    case AugmentKind::kNoiseInjection: return "noise-injection";
    case AugmentKind::kTimeShift: return "time-shift";
    case AugmentKind::kPitchChange: return "pitch-change";
    case AugmentKind::kSpeedChange: return "speed-change";
  }
  return "?";
}

inline AugmentKind parse_augment_kind(std::string_view name) {
  for (AugmentKind k : kAugmentKinds) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown augmentation kind: " + std::string(name));
}

// magnitude units: noise SNR in dB, shift in seconds, pitch in semitones,
// speed as a factor.
struct AugmentSpec {
  AugmentKind kind = AugmentKind::kNoiseInjection;
  double magnitude = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const AugmentSpec&) const = default;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Range&) const = default;
};

struct AugmentRanges {
  Range noise_snr_db{10.0, 30.0};
  Range shift_seconds{-1.0, 1.0};
  Range semitones{-2.0, 2.0};
  Range speed{0.9, 1.1};
  SpeedBounds speed_bounds{};

  const Range& range_for(AugmentKind kind) const {
    switch (kind) {
      case AugmentKind::kNoiseInjection: return noise_snr_db;
      case AugmentKind::kTimeShift: return shift_seconds;
      case AugmentKind::kPitchChange: return semitones;
      case AugmentKind::kSpeedChange: return speed;
    }
    return noise_snr_db;
  }
};

inline AugmentSpec sample_augment_spec(AugmentKind kind, const AugmentRanges& ranges,
                                       Rng& rng) {
  const Range& r = ranges.range_for(kind);
  AugmentSpec spec;
  spec.kind = kind;
  spec.magnitude = uniform(rng, r.lo, r.hi);
  spec.seed = rng();
  return spec;
}

inline void validate(const AugmentSpec& spec, const SpeedBounds& bounds = {}) {
  if (!std::isfinite(spec.magnitude) &&
      !(spec.kind == AugmentKind::kNoiseInjection && spec.magnitude == kNoNoise)) {
    throw ConfigError("augmentation magnitude must be finite");
  }
  if (spec.kind == AugmentKind::kSpeedChange &&
      !(spec.magnitude >= bounds.min && spec.magnitude <= bounds.max)) {
    throw ConfigError("speed factor outside configured bounds");
  }
}

// Applies one transform; the output is a pure function of (clip, spec).
// Time shifts larger than the clip wrap around the clip duration.
inline AudioClip apply_augment(const AudioClip& clip, const AugmentSpec& spec,
                               const SpeedBounds& bounds = {}) {
  validate(spec, bounds);
  switch (spec.kind) {
    case AugmentKind::kNoiseInjection:
      return inject_noise(clip, spec.magnitude, spec.seed);
    case AugmentKind::kTimeShift: {
      const double d = clip.duration_seconds();
      const double s = d > 0.0 ? std::fmod(spec.magnitude, d) : 0.0;
      return time_shift(clip, s, ShiftMode::kCircular);
    }
    case AugmentKind::kPitchChange:
      return pitch_shift(clip, spec.magnitude);
    case AugmentKind::kSpeedChange:
      return speed_change(clip, spec.magnitude, bounds);
  }
  return clip;
}

inline void to_json(nlohmann::json& j, const AugmentSpec& s) {
  j = nlohmann::json{{"kind", std::string(to_string(s.kind))},
                     {"magnitude", s.magnitude},
                     {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, AugmentSpec& s) {
  s.kind = parse_augment_kind(j.at("kind").get<std::string>());
  s.magnitude = j.at("magnitude").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
}

inline void to_json(nlohmann::json& j, const Range& r) { j = nlohmann::json::array({r.lo, r.hi}); }
inline void from_json(const nlohmann::json& j, Range& r) {
  r.lo = j.at(0).get<double>();
  r.hi = j.at(1).get<double>();
}

inline void to_json(nlohmann::json& j, const AugmentRanges& r) {
  j = nlohmann::json{{"noise_snr_db", r.noise_snr_db},
                     {"shift_seconds", r.shift_seconds},
                     {"semitones", r.semitones},
                     {"speed", r.speed},
                     {"speed_bounds", nlohmann::json::array({r.speed_bounds.min, r.speed_bounds.max})}};
}

inline void from_json(const nlohmann::json& j, AugmentRanges& r) {
  if (j.contains("noise_snr_db")) r.noise_snr_db = j["noise_snr_db"].get<Range>();
  if (j.contains("shift_seconds")) r.shift_seconds = j["shift_seconds"].get<Range>();
  if (j.contains("semitones")) r.semitones = j["semitones"].get<Range>();
  if (j.contains("speed")) r.speed = j["speed"].get<Range>();
  if (j.contains("speed_bounds")) {
    r.speed_bounds.min = j["speed_bounds"].at(0).get<double>();
    r.speed_bounds.max = j["speed_bounds"].at(1).get<double>();
  }
}

}  // namespace afd
