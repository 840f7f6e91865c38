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
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "edgecache/eviction.hpp"
#include "edgecache/types.hpp"

namespace edgecache {

/// (block id, generation stamp): each append bumps the stamp, and distinct
/// stamps are distinct cache entries, giving readers snapshot isolation.
struct BlockKey {
  std::string block_id;
  uint64_t generation_stamp = 0;

  bool operator==(const BlockKey& other) const = default;
};

/// Block metadata payload layout understood by the adapter: little-endian
/// header {u32 magic 'BKM1', u32 chunk_size, u64 block_length} followed by
/// one u32 CRC32C per chunk.
std::vector<std::byte> make_block_meta(std::span<const std::byte> block,
                                       uint32_t chunk_bytes = 512);

/// Block-oriented cache facade for a DataNode-style host: stores each
/// (block, checksum-metadata) pair atomically under a per-entry directory
/// (staged, then renamed into place), keys entries by (blockID, generation
/// stamp), tracks the in-memory block mapping, and wipes everything on
/// restart because that mapping cannot be rebuilt.
class BlockCacheAdapter {
 public:
  struct Options {
    std::filesystem::path root;
    uint64_t capacity_bytes = 1ULL << 30;
    uint64_t page_size = 1 << 20;
    uint32_t bucket_count = 1000;
    /// When set, caching generation g of a block purges entries with
    /// older stamps instead of letting them age out.
    bool purge_superseded = false;
  };

  struct Stats {
    uint64_t corrupted_evictions = 0;
    uint64_t capacity_evictions = 0;
  };

  /// Starts from an empty cache: any leftover on-disk contents are cleared,
  /// mirroring the host process restart semantics.
  explicit BlockCacheAdapter(Options options);

  /// Atomically caches the pair. Visibility is all-or-nothing: a failure
  /// mid-write rolls the staged entry back (PartialWriteRolledBack /
  /// DiskFull) and readers never observe a half entry.
  void cache_block(const BlockKey& key, std::span<const std::byte> block_bytes,
                   std::span<const std::byte> meta_bytes);

  /// Serves [offset, offset+length) iff exactly this key is fully cached;
  /// never mixes generations. Checksum mismatch against the cached metadata
  /// evicts the entry and reports a miss.
  std::optional<std::vector<std::byte>> read_block(const BlockKey& key, uint64_t offset,
                                                   uint64_t length);

  std::optional<std::vector<std::byte>> read_meta(const BlockKey& key);

  /// Removes every cached generation of the block using the mapping's file
  /// lengths; returns ceil(length / page_size) summed over removed entries.
  /// Idempotent.
  size_t delete_block(const std::string& block_id);

  /// Clears all cached contents and the in-memory mapping.
  void on_restart();

  /// Latest-generation mapping view: block id -> (cache id, file length).
  std::optional<std::pair<std::string, uint64_t>> mapping(
      const std::string& block_id) const;

  /// Scans the on-disk tree for entries violating pair atomicity (missing
  /// meta, missing pages, or sizes that disagree with the meta header).
  std::vector<std::string> scan_incomplete_entries() const;

  uint64_t used_bytes() const;
  uint64_t cached_payload_bytes_on_disk() const;
  const Options& options() const { return options_; }
  Stats stats() const;

  static std::string cache_id_for(const BlockKey& key);

 private:
  struct Entry {
    std::string cache_id;
    uint64_t block_length = 0;
    uint64_t entry_bytes = 0;  // block + meta payload
  };

  std::filesystem::path entry_dir(const std::string& cache_id) const;
  bool remove_entry_locked(const std::string& block_id, uint64_t generation_stamp);
  void evict_for_capacity_locked(uint64_t incoming);

  Options options_;
  mutable std::mutex mutex_;
  // block id -> generation stamp -> entry
  std::unordered_map<std::string, std::map<uint64_t, Entry>> chains_;
  std::unordered_map<std::string, BlockKey> key_by_cache_id_;
  std::unique_ptr<EvictionPolicy> lru_;
  uint64_t used_bytes_ = 0;
  uint64_t staging_counter_ = 0;
  Stats stats_;
};

}  // namespace edgecache
