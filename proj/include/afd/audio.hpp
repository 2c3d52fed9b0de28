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

// Audio clips, 16-bit PCM WAV I/O and the primitive signal utilities every
// other module builds on.
//
// Samples are stored interleaved (frame-major): sample i of channel c lives at
// index i * channels + c. After ingestion the pipeline works on mono clips.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "afd/binary_io.hpp"
#include "afd/errors.hpp"

namespace afd {

class AudioClip {
 public:
  AudioClip() = default;

  AudioClip(std::vector<float> samples, int sample_rate, int channels = 1)
      : samples_(std::move(samples)),
        sample_rate_(sample_rate),
        channels_(channels) {
    if (sample_rate_ <= 0) throw ConfigError("sample rate must be positive");
    if (channels_ < 1) throw ConfigError("channel count must be >= 1");
    if (samples_.size() % static_cast<std::size_t>(channels_) != 0) {
      throw ConfigError("sample count is not a multiple of channel count");
    }
    for (float s : samples_) {
      if (!std::isfinite(s)) throw DataError("non-finite sample in clip");
    }
  }

  int sample_rate() const { return sample_rate_; }
  int channels() const { return channels_; }
  std::size_t frames() const {
    return samples_.size() / static_cast<std::size_t>(channels_);
  }
  bool empty() const { return samples_.empty(); }
  double duration_seconds() const {
    return static_cast<double>(frames()) / sample_rate_;
  }

  std::span<const float> samples() const { return samples_; }
  float at(std::size_t frame, int channel = 0) const {
    return samples_[frame * static_cast<std::size_t>(channels_) +
                    static_cast<std::size_t>(channel)];
  }

  bool operator==(const AudioClip&) const = default;

 private:
  std::vector<float> samples_;
  int sample_rate_ = 16000;
  int channels_ = 1;
};

inline constexpr double kPcm16Scale = 32768.0;

// ---------------------------------------------------------------------------
// WAV I/O

namespace detail {

inline std::string describe_wav_encoding(std::uint16_t tag,
                                         std::uint16_t bits) {
  std::string name;
  switch (tag) {
    case 1: name = "PCM"; break;
    case 3: name = "IEEE float"; break;
    case 6: name = "A-law"; break;
    case 7: name = "mu-law"; break;
    case 0xFFFE: name = "extensible"; break;
    default: name = "format tag " + std::to_string(tag); break;
  }
  return name + " " + std::to_string(bits) + "-bit";
}

}  // namespace detail

inline AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open WAV file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string where = " (" + path.string() + ")";
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw UnsupportedFormatError("not a RIFF/WAVE file" + where);
  }

  bool have_fmt = false;
  std::uint16_t format_tag = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const auto size = detail::load_le<std::uint32_t>(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) {
        throw CorruptFileError("truncated fmt chunk" + where);
      }
      format_tag = detail::load_le<std::uint16_t>(bytes.data() + body);
      channels = detail::load_le<std::uint16_t>(bytes.data() + body + 2);
      rate = detail::load_le<std::uint32_t>(bytes.data() + body + 4);
      bits = detail::load_le<std::uint16_t>(bytes.data() + body + 14);
      if (format_tag == 0xFFFE && size >= 26) {
        // WAVE_FORMAT_EXTENSIBLE: the real tag is the first two bytes of the
        // subformat GUID.
        format_tag = detail::load_le<std::uint16_t>(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw CorruptFileError("data chunk before fmt" + where);
      if (format_tag != 1 || bits != 16) {
        throw UnsupportedFormatError(
            "unsupported WAV encoding: " +
            detail::describe_wav_encoding(format_tag, bits) +
            " (need PCM 16-bit)" + where);
      }
      if (channels == 0 || rate == 0) {
        throw CorruptFileError("invalid channel count or sample rate" + where);
      }
      if (body + size > bytes.size()) {
        throw CorruptFileError("truncated data chunk: header declares " +
                               std::to_string(size) + " bytes, file has " +
                               std::to_string(bytes.size() - body) + where);
      }
      const std::size_t block = 2u * channels;
      const std::size_t n = (size / block) * channels;
      std::vector<float> samples(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto v = detail::load_le<std::int16_t>(bytes.data() + body + 2 * i);
        samples[i] = static_cast<float>(v / kPcm16Scale);
      }
      return AudioClip(std::move(samples), static_cast<int>(rate), channels);
    }
    pos = body + size + (size & 1u);  // chunks are word aligned
  }
  if (!have_fmt) throw CorruptFileError("missing fmt chunk" + where);
  throw CorruptFileError("missing data chunk" + where);
}

// Writes a canonical 44-byte-header 16-bit PCM file. Samples outside [-1, 1]
// are clamped.
inline void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write WAV file: " + path.string());
  const auto channels = static_cast<std::uint16_t>(clip.channels());
  const auto rate = static_cast<std::uint32_t>(clip.sample_rate());
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples().size() * 2);
  out.write("RIFF", 4);
  detail::write_le<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  detail::write_le<std::uint32_t>(out, 16);
  detail::write_le<std::uint16_t>(out, 1);
  detail::write_le<std::uint16_t>(out, channels);
  detail::write_le<std::uint32_t>(out, rate);
  detail::write_le<std::uint32_t>(out, rate * channels * 2);
  detail::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(channels * 2));
  detail::write_le<std::uint16_t>(out, 16);
  out.write("data", 4);
  detail::write_le<std::uint32_t>(out, data_bytes);
  std::vector<std::int16_t> pcm(clip.samples().size());
  for (std::size_t i = 0; i < pcm.size(); ++i) {
    const double x = std::clamp<double>(clip.samples()[i], -1.0, 1.0);
    const double q = std::round(x * kPcm16Scale);
    pcm[i] = static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0));
  }
  out.write(reinterpret_cast<const char*>(pcm.data()),
            static_cast<std::streamsize>(pcm.size() * 2));
  if (!out) throw DataError("failed writing WAV file: " + path.string());
}

// ---------------------------------------------------------------------------
// Channel reduction

struct ChannelPolicy {
  enum class Kind { kSelect, kAverage };
  Kind kind = Kind::kSelect;
  int channel = 0;

  static ChannelPolicy select(int k) { return {Kind::kSelect, k}; }
  static ChannelPolicy average() { return {Kind::kAverage, 0}; }
};

inline AudioClip to_mono(const AudioClip& clip, ChannelPolicy policy = {}) {
  const int channels = clip.channels();
  if (policy.kind == ChannelPolicy::Kind::kSelect &&
      (policy.channel < 0 || policy.channel >= channels)) {
    throw ConfigError("channel " + std::to_string(policy.channel) +
                      " out of range for " + std::to_string(channels) +
                      "-channel clip");
  }
  if (channels == 1) return clip;
  std::vector<float> mono(clip.frames());
  for (std::size_t f = 0; f < mono.size(); ++f) {
    if (policy.kind == ChannelPolicy::Kind::kSelect) {
      mono[f] = clip.at(f, policy.channel);
    } else {
      double acc = 0.0;
      for (int c = 0; c < channels; ++c) acc += clip.at(f, c);
      mono[f] = static_cast<float>(acc / channels);
    }
  }
  return AudioClip(std::move(mono), clip.sample_rate(), 1);
}

// ---------------------------------------------------------------------------
// Statistics

inline double rms(std::span<const float> samples) {
  if (samples.empty()) throw UndefinedStatisticError("rms of an empty clip");
  double acc = 0.0;
  for (float s : samples) acc += static_cast<double>(s) * s;
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

inline double rms(const AudioClip& clip) { return rms(clip.samples()); }

inline AudioClip scale(const AudioClip& clip, double gain) {
  std::vector<float> out(clip.samples().begin(), clip.samples().end());
  for (float& s : out) s = static_cast<float>(s * gain);
  return AudioClip(std::move(out), clip.sample_rate(), clip.channels());
}

// ---------------------------------------------------------------------------
// Band-limited resampling (Kaiser-windowed sinc)

struct ResampleOptions {
  int taps = 64;       // kernel length at the narrower of the two rates
  double beta = 8.6;   // Kaiser shape
};

namespace detail {

// Tabulated sinc(u) * kaiser(u / half) for u in [0, half], linearly
// interpolated. 1024 points per unit keeps the interpolation error ~1e-6.
class SincTable {
 public:
  SincTable(int taps, double beta) : half_(taps / 2.0) {
    const std::size_t n = static_cast<std::size_t>(half_ * kPerUnit) + 2;
    table_.resize(n);
    const double norm = std::cyl_bessel_i(0.0, beta);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = static_cast<double>(i) / kPerUnit;
      if (u >= half_) {
        table_[i] = 0.0;
        continue;
      }
      const double r = u / half_;
      const double window = std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - r * r)) / norm;
      const double sinc =
          u == 0.0 ? 1.0 : std::sin(std::numbers::pi * u) / (std::numbers::pi * u);
      table_[i] = sinc * window;
    }
  }

  double half_width() const { return half_; }

  double operator()(double u) const {
    u = std::abs(u);
    if (u >= half_) return 0.0;
    const double x = u * kPerUnit;
    const auto i = static_cast<std::size_t>(x);
    const double frac = x - static_cast<double>(i);
    return table_[i] + frac * (table_[i + 1] - table_[i]);
  }

 private:
  static constexpr double kPerUnit = 1024.0;
  double half_;
  std::vector<double> table_;
};

}  // namespace detail

// Resamples a mono signal by `ratio` = output rate / input rate. Output length
// is round(len * ratio); output sample j is the band-limited value at input
// position j / ratio. When downsampling the kernel is widened so the cutoff
// sits at the output Nyquist.
inline std::vector<float> resample_by_ratio(std::span<const float> input,
                                            double ratio,
                                            const ResampleOptions& opts = {}) {
  if (!(ratio > 0.0) || !std::isfinite(ratio)) {
    throw ConfigError("resampling ratio must be positive and finite");
  }
  if (opts.taps < 4) throw ConfigError("resampler needs at least 4 taps");
  const std::size_t len = input.size();
  const auto out_len = static_cast<std::size_t>(std::llround(len * ratio));
  if (ratio == 1.0) return {input.begin(), input.end()};

  const detail::SincTable kernel(opts.taps, opts.beta);
  const double cutoff = std::min(1.0, ratio);
  const double reach = kernel.half_width() / cutoff;  // in input samples
  std::vector<float> out(out_len);
  const auto last = static_cast<std::ptrdiff_t>(len) - 1;
  for (std::size_t j = 0; j < out_len; ++j) {
    const double t = static_cast<double>(j) / ratio;
    const auto lo = static_cast<std::ptrdiff_t>(std::ceil(t - reach));
    const auto hi = static_cast<std::ptrdiff_t>(std::floor(t + reach));
    double acc = 0.0;
    double weight_sum = 0.0;
    for (std::ptrdiff_t i = lo; i <= hi; ++i) {
      const double w = kernel((t - static_cast<double>(i)) * cutoff);
      weight_sum += w;
      if (i >= 0 && i <= last) acc += w * input[static_cast<std::size_t>(i)];
    }
    out[j] = weight_sum > 0.0 ? static_cast<float>(acc / weight_sum) : 0.0f;
  }
  return out;
}

inline AudioClip resample(const AudioClip& clip, int new_rate,
                          const ResampleOptions& opts = {}) {
  if (new_rate <= 0) throw ConfigError("new sample rate must be positive");
  if (clip.channels() != 1) throw ConfigError("resample expects a mono clip");
  if (new_rate == clip.sample_rate()) return clip;
  const double ratio = static_cast<double>(new_rate) / clip.sample_rate();
  return AudioClip(resample_by_ratio(clip.samples(), ratio, opts), new_rate, 1);
}

}  // namespace afd
