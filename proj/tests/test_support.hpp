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

// Shared helpers and independent reference implementations for the tests.

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "afd/audio.hpp"

namespace afd::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("afd_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

inline AudioClip sine(double hz, double seconds, int rate, double amplitude = 0.5, double phase = 0.0) {
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  std::vector<float> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = static_cast<float>(amplitude * std::sin(2.0 * std::numbers::pi * hz * i / rate + phase));
  }
  return AudioClip(std::move(x), rate);
}

// |X(f)|^2 of a real signal at an arbitrary frequency, by direct summation.
inline double dft_power_at(std::span<const float> x, double hz, int rate) {
  std::complex<double> acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    acc += static_cast<double>(x[i]) * std::polar(1.0, -2.0 * std::numbers::pi * hz * i / rate);
  }
  return std::norm(acc);
}

// Frequency of the strongest component, searched on a fine grid with a
// Hann window applied first.
inline double dominant_frequency(std::span<const float> x, int rate, double lo, double hi, double step) {
  std::vector<float> w(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    w[i] = static_cast<float>(x[i] * (0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / x.size())));
  }
  double best_f = lo, best_p = -1.0;
  for (double f = lo; f <= hi; f += step) {
    const double p = dft_power_at(w, f, rate);
    if (p > best_p) best_p = p, best_f = f;
  }
  return best_f;
}

// 16-bit little-endian byte helpers for hand-built WAV files.
inline void put16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}
inline void put32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct WavSpec {
  std::uint16_t format = 1;
  std::uint16_t channels = 1;
  std::uint32_t rate = 16000;
  std::uint16_t bits = 16;
  std::string extra_chunk;  // inserted between fmt and data when non-empty
  std::uint32_t data_size_override = 0;
};

inline std::string make_wav(const WavSpec& spec, const std::string& data) {
  std::string body = "WAVE";
  body += "fmt ";
  put32(body, 16);
  put16(body, spec.format);
  put16(body, spec.channels);
  put32(body, spec.rate);
  put32(body, spec.rate * spec.channels * spec.bits / 8);
  put16(body, static_cast<std::uint16_t>(spec.channels * spec.bits / 8));
  put16(body, spec.bits);
  body += spec.extra_chunk;
  body += "data";
  put32(body, spec.data_size_override ? spec.data_size_override : static_cast<std::uint32_t>(data.size()));
  body += data;
  std::string out = "RIFF";
  put32(out, static_cast<std::uint32_t>(body.size()));
  return out + body;
}

}  // namespace afd::testing
