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

#include "edgecache/checksum.hpp"

#include <array>

namespace edgecache {

namespace {

std::array<uint32_t, 256> make_crc32c_table() {
  std::array<uint32_t, 256> table{};
  for (uint32_t i = 0; i < 256; ++i) {
    uint32_t crc = i;
    for (int k = 0; k < 8; ++k) {
      crc = (crc >> 1) ^ (0x82F63B78u & (~(crc & 1) + 1));
    }
    table[i] = crc;
  }
  return table;
}

const std::array<uint32_t, 256>& crc32c_table() {
  static const std::array<uint32_t, 256> table = make_crc32c_table();
  return table;
}

}  // namespace

uint32_t crc32c(std::span<const std::byte> data, uint32_t seed) {
  const auto& table = crc32c_table();
  uint32_t crc = ~seed;
  for (std::byte b : data) {
    crc = table[(crc ^ static_cast<uint8_t>(b)) & 0xFF] ^ (crc >> 8);
  }
  return ~crc;
}

std::vector<uint32_t> chunk_checksums(std::span<const std::byte> data,
                                      size_t chunk_bytes) {
  std::vector<uint32_t> out;
  out.reserve((data.size() + chunk_bytes - 1) / chunk_bytes);
  for (size_t off = 0; off < data.size(); off += chunk_bytes) {
    size_t len = std::min(chunk_bytes, data.size() - off);
    out.push_back(crc32c(data.subspan(off, len)));
  }
  return out;
}

}  // namespace edgecache
