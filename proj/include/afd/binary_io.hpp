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

// Little-endian binary helpers and a stable string hash shared by the file
// formats (WAV, feature cache, checkpoints).

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string_view>

namespace afd::detail {

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

template <typename T>
inline void write_le(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
inline bool read_le(std::istream& in, T& value) {
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return static_cast<std::size_t>(in.gcount()) == sizeof(T);
}

template <typename T>
inline T load_le(const unsigned char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  return value;
}

// FNV-1a, 64 bit. Used wherever a seed or a content hash has to be stable
// across runs and platforms (std::hash is neither).
inline std::uint64_t fnv1a(std::span<const unsigned char> bytes,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(std::string_view s,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(std::span(reinterpret_cast<const unsigned char*>(s.data()),
                         s.size()),
               h);
}

// Derive an independent child seed from a parent seed and a label.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  unsigned char raw[8];
  std::memcpy(raw, &seed, 8);
  std::uint64_t h = fnv1a(std::span<const unsigned char>(raw, 8));
  h = fnv1a(label, h);
  // splitmix64 finalizer
  h += 0x9e3779b97f4a7c15ULL;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
  return h ^ (h >> 31);
}

}  // namespace afd::detail
