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

// Minimal deterministic SVG output: line charts for training curves and a
// 2x2 confusion-matrix heatmap.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "afd/errors.hpp"
#include "afd/metrics.hpp"

namespace afd::svg {

struct Series {
  std::string name;
  std::vector<double> values;  // y at x = 1, 2, ...
  std::string color;
};

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                              const std::vector<Series>& series) {
  const double width = 480, height = 320, left = 60, right = 130, top = 36, bottom = 48;
  const double pw = width - left - right, ph = height - top - bottom;
  std::size_t n = 0;
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& s : series) {
    n = std::max(n, s.values.size());
    for (double v : s.values) {
      if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
    }
  }
  if (!(lo <= hi)) lo = 0, hi = 1;
  if (hi - lo < 1e-9) lo -= 0.5, hi += 0.5;
  const double x_span = n > 1 ? static_cast<double>(n - 1) : 1.0;
  auto px = [&](std::size_t i) { return left + pw * static_cast<double>(i) / x_span; };
  auto py = [&](double v) { return top + ph * (1.0 - (v - lo) / (hi - lo)); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(width / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
     << "</text>\n";
  os << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    os << "<line x1=\"" << num(left - 4) << "\" y1=\"" << num(py(v)) << "\" x2=\"" << num(left) << "\" y2=\""
       << num(py(v)) << "\" stroke=\"#444\"/>";
    os << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(v) + 4) << "\" text-anchor=\"end\">"
       << (std::abs(hi - lo) < 10 ? num(v) : std::to_string(static_cast<long>(std::lround(v)))) << "</text>\n";
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (n > 10 && (i + 1) % 5 != 0 && i != 0) continue;
    os << "<text x=\"" << num(px(i)) << "\" y=\"" << num(top + ph + 16) << "\" text-anchor=\"middle\">" << i + 1
       << "</text>\n";
  }
  os << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(height - 10) << "\" text-anchor=\"middle\">"
     << escape(x_label) << "</text>\n";
  os << "<text x=\"14\" y=\"" << num(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
     << num(top + ph / 2) << ")\">" << escape(y_label) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ser = series[s];
    os << "<polyline fill=\"none\" stroke=\"" << ser.color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < ser.values.size(); ++i) {
      if (!std::isfinite(ser.values[i])) continue;
      os << (i ? " " : "") << num(px(i)) << ',' << num(py(ser.values[i]));
    }
    os << "\"/>\n";
    const double ly = top + 14 + 18 * static_cast<double>(s);
    os << "<line x1=\"" << num(left + pw + 10) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(left + pw + 30)
       << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << ser.color << "\" stroke-width=\"2\"/>";
    os << "<text x=\"" << num(left + pw + 36) << "\" y=\"" << num(ly) << "\">" << escape(ser.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

// Rows: actual (normal, abnormal); columns: predicted.
inline std::string confusion_heatmap(const std::string& title, const ConfusionMatrix& cm) {
  const std::size_t cells[2][2] = {{cm.tn, cm.fp}, {cm.fn, cm.tp}};
  const double total = static_cast<double>(std::max<std::size_t>(1, cm.tp + cm.tn + cm.fp + cm.fn));
  const double size = 90, left = 110, top = 60;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"320\" height=\"280\" font-family=\"sans-serif\" "
        "font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"160\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title) << "</text>\n";
  const char* names[2] = {"normal", "abnormal"};
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      const double frac = static_cast<double>(cells[r][c]) / total;
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - frac)));
      char fill[8];
      std::snprintf(fill, sizeof fill, "#%02x%02xff", shade, shade);
      const double x = left + size * c, y = top + size * r;
      os << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(size) << "\" height=\""
         << num(size) << "\" fill=\"" << fill << "\" stroke=\"#444\"/>";
      os << "<text x=\"" << num(x + size / 2) << "\" y=\"" << num(y + size / 2 + 5) << "\" text-anchor=\"middle\" "
         << "fill=\"" << (frac > 0.5 ? "white" : "black") << "\">" << cells[r][c] << "</text>\n";
    }
    os << "<text x=\"" << num(left - 8) << "\" y=\"" << num(top + size * r + size / 2 + 4)
       << "\" text-anchor=\"end\">" << names[r] << "</text>\n";
    os << "<text x=\"" << num(left + size * r + size / 2) << "\" y=\"" << num(top - 8)
       << "\" text-anchor=\"middle\">" << names[r] << "</text>\n";
  }
  os << "<text x=\"" << num(left + size) << "\" y=\"" << num(top + 2 * size + 24)
     << "\" text-anchor=\"middle\">predicted</text>\n";
  os << "<text x=\"20\" y=\"" << num(top + size) << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
     << num(top + size) << ")\">actual</text>\n";
  os << "</svg>\n";
  return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

}  // namespace afd::svg
