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

// Mel-spectrogram front end: STFT power, HTK mel filterbank, log compression
// and the fixed-size normalized image the classifier consumes. Also the PNG
// and binary feature-cache formats for those images.

#include <fftw3.h>
#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

#include "afd/audio.hpp"
#include "afd/binary_io.hpp"
#include "afd/errors.hpp"
#include "json.hpp"

namespace afd {

// Row-major dense matrix.
template <typename T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  bool empty() const { return data.empty(); }
  bool operator==(const Matrix&) const = default;
};

struct ImageSize {
  std::size_t height = 64;
  std::size_t width = 64;
  bool operator==(const ImageSize&) const = default;
};

struct SpectrogramParams {
  int n_fft = 1024;
  int hop = 512;
  int n_mels = 64;
  double f_min = 0.0;
  double f_max = 8000.0;
  double log_floor_db = -80.0;
  ImageSize image_size{};

  bool operator==(const SpectrogramParams&) const = default;
};

inline void validate(const SpectrogramParams& p, int sample_rate) {
  if (p.n_fft < 2) throw ConfigError("n_fft must be >= 2");
  if (p.hop <= 0 || p.hop > p.n_fft) throw ConfigError("hop must be in (0, n_fft]");
  if (p.n_mels < 2) throw ConfigError("n_mels must be >= 2");
  if (p.f_min < 0.0 || !(p.f_min < p.f_max)) throw ConfigError("need 0 <= f_min < f_max");
  if (p.f_max > sample_rate / 2.0) {
    throw ConfigError("f_max " + std::to_string(p.f_max) + " Hz exceeds Nyquist " +
                      std::to_string(sample_rate / 2.0) + " Hz");
  }
  if (!std::isfinite(p.log_floor_db)) throw ConfigError("log floor must be finite");
  if (p.image_size.height == 0 || p.image_size.width == 0) {
    throw ConfigError("image size must be positive");
  }
}

// frames = 1 + floor((len - n_fft) / hop); no padding at either end.
inline std::size_t frame_count(std::size_t len, int n_fft, int hop) {
  if (len < static_cast<std::size_t>(n_fft)) return 0;
  return 1 + (len - static_cast<std::size_t>(n_fft)) / static_cast<std::size_t>(hop);
}

// ---------------------------------------------------------------------------
// STFT

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// One real-to-complex FFTW plan with its own buffers. The planner is not
// thread-safe, execution is.
class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    std::lock_guard lock(fftw_planner_mutex());
    in_ = fftw_alloc_real(static_cast<std::size_t>(n));
    out_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  const fftw_complex* output() const { return out_; }
  void execute() { fftw_execute(plan_); }
  int size() const { return n_; }

 private:
  int n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

}  // namespace detail

// Periodic Hann window of length n.
inline std::vector<double> hann_window(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  }
  return w;
}

// (n_fft/2 + 1) x frames matrix of |DFT(hann * frame)|^2.
inline Matrix<double> stft_power(const AudioClip& clip, const SpectrogramParams& params) {
  if (clip.channels() != 1) throw ConfigError("stft_power expects a mono clip");
  if (params.n_fft < 2 || params.hop <= 0 || params.hop > params.n_fft) {
    throw ConfigError("invalid STFT parameters");
  }
  const auto samples = clip.samples();
  if (samples.size() < static_cast<std::size_t>(params.n_fft)) {
    throw DataError("clip of " + std::to_string(samples.size()) +
                    " samples is shorter than n_fft " + std::to_string(params.n_fft));
  }
  const std::size_t frames = frame_count(samples.size(), params.n_fft, params.hop);
  const std::size_t bins = static_cast<std::size_t>(params.n_fft / 2 + 1);
  const auto window = hann_window(params.n_fft);
  Matrix<double> power(bins, frames);
  detail::RealFft fft(params.n_fft);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t start = t * static_cast<std::size_t>(params.hop);
    for (int i = 0; i < params.n_fft; ++i) {
      fft.input()[i] = window[static_cast<std::size_t>(i)] * samples[start + static_cast<std::size_t>(i)];
    }
    fft.execute();
    for (std::size_t k = 0; k < bins; ++k) {
      const double re = fft.output()[k][0];
      const double im = fft.output()[k][1];
      power(k, t) = re * re + im * im;
    }
  }
  return power;
}

// ---------------------------------------------------------------------------
// Mel filterbank (HTK mel scale, unnormalized triangles)

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

class MelFilterbank {
 public:
  MelFilterbank(const SpectrogramParams& params, int sample_rate)
      : sample_rate_(sample_rate), n_fft_(params.n_fft) {
    validate(params, sample_rate);
    const double lo = hz_to_mel(params.f_min);
    const double hi = hz_to_mel(params.f_max);
    const auto n = static_cast<std::size_t>(params.n_mels);
    edges_mel_.resize(n + 2);
    for (std::size_t i = 0; i < n + 2; ++i) {
      edges_mel_[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n + 1);
    }
    const std::size_t bins = static_cast<std::size_t>(n_fft_ / 2 + 1);
    weights_ = Matrix<double>(n, bins);
    for (std::size_t m = 0; m < n; ++m) {
      for (std::size_t k = 0; k < bins; ++k) {
        weights_(m, k) = response(m, bin_frequency(k));
      }
    }
  }

  std::size_t size() const { return weights_.rows; }
  std::size_t bins() const { return weights_.cols; }
  const Matrix<double>& weights() const { return weights_; }

  double bin_frequency(std::size_t k) const {
    return static_cast<double>(k) * sample_rate_ / n_fft_;
  }
  double center_hz(std::size_t m) const { return mel_to_hz(edges_mel_[m + 1]); }
  double lower_edge_hz(std::size_t m) const { return mel_to_hz(edges_mel_[m]); }
  double upper_edge_hz(std::size_t m) const { return mel_to_hz(edges_mel_[m + 2]); }

  // Triangle m evaluated at an arbitrary frequency (linear in mel).
  double response(std::size_t m, double hz) const {
    const double x = hz_to_mel(hz);
    const double l = edges_mel_[m], c = edges_mel_[m + 1], r = edges_mel_[m + 2];
    if (x <= l || x >= r) return 0.0;
    return x <= c ? (x - l) / (c - l) : (r - x) / (r - c);
  }

  // n_mels x frames = weights * power.
  Matrix<double> apply(const Matrix<double>& power) const {
    if (power.rows != bins()) throw ConfigError("power matrix has wrong bin count");
    Matrix<double> out(size(), power.cols);
    for (std::size_t m = 0; m < size(); ++m) {
      for (std::size_t k = 0; k < bins(); ++k) {
        const double w = weights_(m, k);
        if (w == 0.0) continue;
        for (std::size_t t = 0; t < power.cols; ++t) out(m, t) += w * power(k, t);
      }
    }
    return out;
  }

 private:
  int sample_rate_;
  int n_fft_;
  std::vector<double> edges_mel_;
  Matrix<double> weights_;
};

struct MelSpectrogram {
  Matrix<double> values;  // n_mels x frames, dB, >= log_floor_db
  SpectrogramParams params;
};

// 10 log10(x + eps), eps = 10^(floor/10), clamped at the floor.
inline double power_to_db(double x, double log_floor_db) {
  if (!(x > 0.0)) return log_floor_db;
  const double eps = std::pow(10.0, log_floor_db / 10.0);
  return std::max(log_floor_db, 10.0 * std::log10(x + eps));
}

inline MelSpectrogram mel_spectrogram(const AudioClip& clip, const SpectrogramParams& params,
                                      const MelFilterbank& bank) {
  auto mel = bank.apply(stft_power(clip, params));
  for (double& v : mel.data) v = power_to_db(v, params.log_floor_db);
  return {std::move(mel), params};
}

inline MelSpectrogram mel_spectrogram(const AudioClip& clip, const SpectrogramParams& params) {
  return mel_spectrogram(clip, params, MelFilterbank(params, clip.sample_rate()));
}

// ---------------------------------------------------------------------------
// Feature images

struct FeatureImage {
  Matrix<float> pixels;  // values in [0, 1]

  std::size_t height() const { return pixels.rows; }
  std::size_t width() const { return pixels.cols; }
  bool operator==(const FeatureImage&) const = default;
};

// Bilinear resize with corner alignment: output corners sample input corners
// exactly.
inline Matrix<double> resize_bilinear(const Matrix<double>& in, ImageSize size) {
  Matrix<double> out(size.height, size.width);
  const double sy = size.height > 1 ? static_cast<double>(in.rows - 1) / (size.height - 1) : 0.0;
  const double sx = size.width > 1 ? static_cast<double>(in.cols - 1) / (size.width - 1) : 0.0;
  for (std::size_t y = 0; y < size.height; ++y) {
    const double fy = y * sy;
    const auto y0 = std::min(static_cast<std::size_t>(fy), in.rows - 1);
    const std::size_t y1 = std::min(y0 + 1, in.rows - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < size.width; ++x) {
      const double fx = x * sx;
      const auto x0 = std::min(static_cast<std::size_t>(fx), in.cols - 1);
      const std::size_t x1 = std::min(x0 + 1, in.cols - 1);
      const double wx = fx - static_cast<double>(x0);
      const double top = in(y0, x0) * (1.0 - wx) + in(y0, x1) * wx;
      const double bottom = in(y1, x0) * (1.0 - wx) + in(y1, x1) * wx;
      out(y, x) = top * (1.0 - wy) + bottom * wy;
    }
  }
  return out;
}

// Resize, then min-max normalize to [0, 1]. A constant input gives an
// all-zero image.
inline FeatureImage to_feature_image(const MelSpectrogram& mel, ImageSize size) {
  if (mel.values.empty()) throw DataError("cannot build an image from an empty spectrogram");
  if (size.height == 0 || size.width == 0) throw ConfigError("image size must be positive");
  const auto resized = resize_bilinear(mel.values, size);
  const auto [lo_it, hi_it] = std::minmax_element(resized.data.begin(), resized.data.end());
  const double lo = *lo_it, hi = *hi_it;
  FeatureImage image{Matrix<float>(size.height, size.width, 0.0f)};
  if (hi > lo) {
    for (std::size_t i = 0; i < resized.data.size(); ++i) {
      image.pixels.data[i] = static_cast<float>(std::clamp((resized.data[i] - lo) / (hi - lo), 0.0, 1.0));
    }
  }
  return image;
}

// Whole path: clip -> mel -> image.
inline FeatureImage featurize(const AudioClip& mono, const SpectrogramParams& params,
                              const MelFilterbank& bank) {
  return to_feature_image(mel_spectrogram(mono, params, bank), params.image_size);
}

// ---------------------------------------------------------------------------
// PNG (8-bit grayscale)

// pixel = round(255 * value)
inline void export_png(const FeatureImage& image, const std::filesystem::path& path) {
  std::vector<png_byte> gray(image.pixels.data.size());
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const double v = std::clamp<double>(image.pixels.data[i], 0.0, 1.0);
    gray[i] = static_cast<png_byte>(std::lround(255.0 * v));
  }
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width());
  png.height = static_cast<png_uint_32>(image.height());
  png.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.c_str(), 0, gray.data(), 0, nullptr)) {
    const std::string why = png.message;
    png_image_free(&png);
    throw DataError("cannot write PNG file " + path.string() + ": " + why);
  }
}

// Reads a PNG (converted to 8-bit gray) back into [0, 1] pixels.
inline FeatureImage read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    const std::string why = png.message;
    png_image_free(&png);
    throw UnsupportedFormatError("cannot read PNG file " + path.string() + ": " + why);
  }
  png.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> gray(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, gray.data(), 0, nullptr)) {
    const std::string why = png.message;
    png_image_free(&png);
    throw CorruptFileError("bad PNG image data in " + path.string() + ": " + why);
  }
  FeatureImage image{Matrix<float>(png.height, png.width)};
  for (std::size_t i = 0; i < gray.size(); ++i) image.pixels.data[i] = static_cast<float>(gray[i] / 255.0);
  return image;
}

// ---------------------------------------------------------------------------
// Binary feature cache: "AFDF", u32 rank, u32 dims..., f32 values (row-major)

inline constexpr std::array<char, 4> kFeatureMagic = {'A', 'F', 'D', 'F'};

inline void write_feature(const FeatureImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write feature file: " + path.string());
  out.write(kFeatureMagic.data(), 4);
  detail::write_le<std::uint32_t>(out, 2);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(image.height()));
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(image.width()));
  out.write(reinterpret_cast<const char*>(image.pixels.data.data()),
            static_cast<std::streamsize>(image.pixels.data.size() * sizeof(float)));
  if (!out) throw DataError("failed writing feature file: " + path.string());
}

inline FeatureImage read_feature(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file: " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  std::uint32_t rank = 0, h = 0, w = 0;
  if (magic != kFeatureMagic || !detail::read_le(in, rank) || rank != 2 ||
      !detail::read_le(in, h) || !detail::read_le(in, w)) {
    throw CorruptFileError("bad feature file header: " + path.string());
  }
  FeatureImage image{Matrix<float>(h, w)};
  in.read(reinterpret_cast<char*>(image.pixels.data.data()),
          static_cast<std::streamsize>(image.pixels.data.size() * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != image.pixels.data.size() * sizeof(float)) {
    throw CorruptFileError("truncated feature file: " + path.string());
  }
  return image;
}

inline void to_json(nlohmann::json& j, const SpectrogramParams& p) {
  j = nlohmann::json{{"n_fft", p.n_fft},
                     {"hop", p.hop},
                     {"window", "hann"},
                     {"n_mels", p.n_mels},
                     {"f_min", p.f_min},
                     {"f_max", p.f_max},
                     {"log_floor_db", p.log_floor_db},
                     {"image_size", {p.image_size.height, p.image_size.width}}};
}

inline void from_json(const nlohmann::json& j, SpectrogramParams& p) {
  if (j.contains("window") && j["window"] != "hann") throw ConfigError("only the hann window is supported");
  p.n_fft = j.value("n_fft", p.n_fft);
  p.hop = j.value("hop", p.hop);
  p.n_mels = j.value("n_mels", p.n_mels);
  p.f_min = j.value("f_min", p.f_min);
  p.f_max = j.value("f_max", p.f_max);
  p.log_floor_db = j.value("log_floor_db", p.log_floor_db);
  if (j.contains("image_size")) {
    p.image_size.height = j["image_size"].at(0).get<std::size_t>();
    p.image_size.width = j["image_size"].at(1).get<std::size_t>();
  }
}

}  // namespace afd
