/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
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

namespace edgecache {

/// FNV-1a, 64 bit.
constexpr uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// splitmix64 finalizer.
constexpr uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Process-stable string hash used for bucket placement, directory
/// allocation, ring points and synthetic content. This function is part of
/// the v1 on-disk format (bucket = stable_hash64(file_id) % bucket_count)
/// and must never change.
constexpr uint64_t stable_hash64(std::string_view s) { return mix64(fnv1a64(s)); }

constexpr uint64_t stable_hash64(std::string_view s, uint64_t seed) {
  return mix64(fnv1a64(s) ^ seed);
}

/// Derives the cache-internal file id from the logical file name and its
/// version token. The version participates in the hash so a new version of a
/// file gets a fresh id and stale pages become unreachable. 32 lowercase hex
/// chars (two independent 64-bit hashes).
std::string make_file_id(std::string_view file_name, std::string_view version);

/// Uniform double in [0, 1) from the top 53 bits of a u64. Used wherever a
/// deterministic cross-platform mapping from hashes to reals is needed.
constexpr double u64_to_unit_double(uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

}  // namespace edgecache
