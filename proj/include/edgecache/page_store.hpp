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

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "edgecache/types.hpp"

namespace edgecache {

/// Layout of one cache directory root. On-disk format v1:
///   <root>/page_size=<decimal>/bucket_<decimal b>/<file_id hex>/<page_index>
/// where b = stable_hash64(file_id) % bucket_count. Page files hold raw page
/// bytes with no header. When page checksums are enabled, a sidecar
/// "<page_index>.crc" holds one little-endian CRC32C per 512-byte chunk.
struct StoreLayout {
  std::filesystem::path root;
  uint64_t page_size = 1 << 20;
  uint32_t bucket_count = 1000;
};

struct PageRecord {
  PageId page_id;
  uint64_t length = 0;
  uint32_t dir = 0;

  bool operator==(const PageRecord& other) const = default;
};

struct RestoreResult {
  std::vector<PageRecord> records;
  /// Mtime (ms since epoch) per record, same order; best-effort, used to
  /// rebuild recency and TTL baselines.
  std::vector<Timestamp> mtimes;
  /// Paths that did not conform to the layout and were skipped.
  std::vector<std::string> skipped;
};

/// Test/fault-injection hooks. Called at the start of the respective
/// operation; a hook may sleep (hang injection) or throw (e.g. DiskFull).
struct StoreHooks {
  std::function<void(const PageId&)> before_read;
  std::function<void(const PageId&)> before_write;
};

/// Persists pages as individual files, one hierarchical layout per cache
/// directory. Stateless apart from configuration: the directory tree is the
/// source of truth, and restore() rebuilds all page metadata from it.
///
/// Concurrency: distinct pages proceed fully in parallel. Visibility is
/// all-or-nothing per page: writes go to a temp name in the final directory
/// and are renamed into place, so a concurrent reader sees either no page or
/// the complete page. Callers serialize writes to the same page.
class PageStore {
 public:
  struct Options {
    std::vector<std::filesystem::path> dirs;
    uint64_t page_size = 1 << 20;
    uint32_t bucket_count = 1000;
    bool checksums = false;
  };

  /// Creates layout folders as needed. Throws PageSizeMismatch if a root
  /// already holds a store with a different page size.
  explicit PageStore(Options options);

  static std::filesystem::path path_for(const StoreLayout& layout, const PageId& id);

  uint64_t page_size() const { return options_.page_size; }
  size_t dir_count() const { return options_.dirs.size(); }
  const StoreLayout& layout(uint32_t dir) const { return layouts_[dir]; }
  bool checksums_enabled() const { return options_.checksums; }

  void set_hooks(StoreHooks hooks) { hooks_ = std::move(hooks); }

  /// Atomically persists one page (1 <= size <= page_size). ENOSPC surfaces
  /// as DiskFull so the caller can trigger early eviction.
  PageRecord write_page(const PageId& id, std::span<const std::byte> data, uint32_t dir);

  /// Reads [offset, offset+out.size()) of a stored page into `out`.
  /// `expected_length`, when nonzero, is the length recorded at write time;
  /// a size mismatch on disk reports Corrupted rather than a short read.
  /// With checksums enabled the covered 512-byte chunks are verified.
  /// Timeout enforcement is the cache manager's job; this call is plain
  /// blocking I/O.
  void read_page(const PageId& id, uint32_t dir, uint64_t offset,
                 std::span<std::byte> out, uint64_t expected_length = 0) const;

  /// Returns true iff a page was removed. Idempotent.
  bool delete_page(const PageId& id, uint32_t dir);

  /// Walks every cache directory and reconstructs all well-formed pages.
  /// Malformed entries are reported in `skipped`, never fatal.
  RestoreResult restore() const;

  /// Total bytes of page files currently under the given directory root.
  uint64_t disk_usage(uint32_t dir) const;

 private:
  std::filesystem::path page_path(const PageId& id, uint32_t dir) const;
  void write_file_atomic(const std::filesystem::path& final_path,
                         std::span<const std::byte> data) const;

  Options options_;
  std::vector<StoreLayout> layouts_;
  StoreHooks hooks_;
  mutable std::atomic<uint64_t> temp_counter_{0};
};

}  // namespace edgecache
