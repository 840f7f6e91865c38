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
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace edgecache {

/// Milliseconds since the Unix epoch. All timestamps in the library use this
/// unit so that traces, TTLs and the admission window share one clock.
using Timestamp = int64_t;
using DurationMs = int64_t;

/// Injectable time source. Replay drives the cache with a virtual clock
/// derived from trace timestamps; production uses the system clock.
using Clock = std::function<Timestamp()>;

Timestamp system_now_ms();

enum class ErrorKind {
  IoError,
  DiskFull,
  NotFound,
  Timeout,
  Corrupted,
  PageSizeMismatch,
  DuplicatePage,
  InvalidRange,
  NoSpace,
  ImpossibleFit,
  BackingUnavailable,
  RingEmpty,
  UnknownNode,
  ParseError,
  PartialWriteRolledBack,
};

const char* to_string(ErrorKind kind);

class CacheError : public std::runtime_error {
 public:
  CacheError(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

/// Cache addressing unit: (file id, page index). The file id is an opaque
/// lowercase-hex token; page_index = floor(file_offset / page_size).
struct PageId {
  std::string file_id;
  uint64_t page_index = 0;

  bool operator==(const PageId& other) const = default;
  bool operator<(const PageId& other) const {
    if (file_id != other.file_id) return file_id < other.file_id;
    return page_index < other.page_index;
  }
};

struct PageIdHash {
  size_t operator()(const PageId& id) const;
};

/// Hierarchical tenant path used for quota and bulk page operations.
/// Depth 0 is the global scope; deeper levels are schema, table, partition.
class Scope {
 public:
  Scope() = default;
  explicit Scope(std::vector<std::string> path);

  static Scope global() { return Scope(); }
  static Scope of(std::initializer_list<std::string> labels);

  /// Parses "schema[.table[.partition]]"; the empty string is global.
  static Scope parse(std::string_view text);

  const std::vector<std::string>& path() const { return path_; }
  size_t depth() const { return path_.size(); }
  bool is_global() const { return path_.empty(); }

  /// True iff this scope's path is a (non-strict) prefix of other's.
  bool contains(const Scope& other) const;

  Scope parent() const;
  Scope truncated(size_t depth) const;

  /// "schema.table.partition" form; global is the empty string.
  std::string str() const;

  bool operator==(const Scope& other) const = default;
  bool operator<(const Scope& other) const { return path_ < other.path_; }

 private:
  std::vector<std::string> path_;
};

constexpr size_t kMaxScopeDepth = 3;

/// Source of truth the cache reads through to. Reads must be immutable for a
/// fixed (file, version) pair; a short read signals end of file.
class BackingStore {
 public:
  virtual ~BackingStore() = default;
  virtual std::vector<std::byte> read(const std::string& file, uint64_t offset,
                                      uint64_t length) = 0;
  virtual std::string file_version(const std::string& file) = 0;
};

}  // namespace edgecache
