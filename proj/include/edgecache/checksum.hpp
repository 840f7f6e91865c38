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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace edgecache {

/// CRC32C (Castagnoli). Software table implementation, matches the common
/// polynomial 0x1EDC6F41 (reflected 0x82F63B78).
uint32_t crc32c(std::span<const std::byte> data, uint32_t seed = 0);

constexpr size_t kChecksumChunkBytes = 512;

/// One CRC32C per kChecksumChunkBytes chunk; the final chunk may be short.
std::vector<uint32_t> chunk_checksums(std::span<const std::byte> data,
                                      size_t chunk_bytes = kChecksumChunkBytes);

}  // namespace edgecache
