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

#include <cstdint>
#include <string>
#include <string_view>

#include "afd/errors.hpp"

namespace afd {

// Binary class label. Abnormal is the positive class everywhere.
enum class Label : std::uint8_t { kNormal = 0, kAbnormal = 1 };

inline std::string_view to_string(Label label) {
  return label == Label::kAbnormal ? "abnormal" : "normal";
}

inline Label parse_label(std::string_view s) {
  if (s == "normal") return Label::kNormal;
  if (s == "abnormal") return Label::kAbnormal;
  throw DataError("unknown label: " + std::string(s));
}

inline bool is_positive(Label label) { return label == Label::kAbnormal; }

}  // namespace afd
