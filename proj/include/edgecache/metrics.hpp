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

#include <array>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "edgecache/types.hpp"

namespace edgecache {

enum class MetricKind {
  Hit,
  MissCached,
  MissBypassed,
  Fallback,
  Evict,
  AdmitRejectStatic,
  AdmitRejectRate,
  Error,
};

enum class MetricOp { Get, Put, Delete };

enum class ErrorClass { Timeout, Corrupted, DiskFull, Io };

const char* to_string(MetricKind kind);
const char* to_string(MetricOp op);
const char* to_string(ErrorClass err);

struct MetricEvent {
  MetricKind kind = MetricKind::Hit;
  MetricOp op = MetricOp::Get;
  std::optional<ErrorClass> error_class;  // Error events only
  Scope scope;
  uint64_t bytes = 0;
  std::string run_id;
};

struct MetricCell {
  uint64_t count = 0;
  uint64_t bytes = 0;
};

/// Full-resolution counter key. error_class is empty for non-error kinds.
struct MetricKey {
  MetricKind kind = MetricKind::Hit;
  MetricOp op = MetricOp::Get;
  std::optional<ErrorClass> error_class;
  std::string scope;
  std::string run_id;

  bool operator==(const MetricKey& other) const = default;
};

struct GroupBy {
  bool kind = false;
  bool op = false;
  bool error_class = false;
  bool run_id = false;
  /// When set, scopes are grouped after truncating to this depth
  /// (0 = global, 1 = schema, 2 = table, 3 = partition).
  std::optional<size_t> scope_depth;
};

struct GroupRow {
  /// Empty strings mark collapsed dimensions.
  std::string kind;
  std::string op;
  std::string error_class;
  std::string scope;
  std::string run_id;
  uint64_t count = 0;
  uint64_t bytes = 0;
  /// HIT / (HIT + MISS_CACHED + MISS_BYPASSED + FALLBACK) within the group;
  /// absent when the group saw no read outcomes.
  std::optional<double> hit_rate;
};

/// Point-in-time rollup of all counters.
class MetricsSnapshot {
 public:
  explicit MetricsSnapshot(std::vector<std::pair<MetricKey, MetricCell>> rows);

  const std::vector<std::pair<MetricKey, MetricCell>>& rows() const { return rows_; }

  std::vector<GroupRow> group(const GroupBy& by) const;

  uint64_t count_of(MetricKind kind) const;
  uint64_t bytes_of(MetricKind kind) const;
  uint64_t error_count(MetricOp op, ErrorClass err) const;
  std::optional<double> hit_rate() const;
  uint64_t bytes_from_remote() const;

  /// {"counters": [...], "derived": {...}} document.
  std::string to_json(int indent = -1) const;

 private:
  std::vector<std::pair<MetricKey, MetricCell>> rows_;
};

/// Thread-safe counter registry. record() folds an event into the cell for
/// (kind, op, error_class, scope, run_id); shards keep the hot path short
/// and uncontended.
class MetricsRegistry {
 public:
  void record(const MetricEvent& event);
  MetricsSnapshot snapshot() const;

 private:
  struct KeyHash {
    size_t operator()(const MetricKey& key) const;
  };
  struct Shard {
    mutable std::mutex mutex;
    std::unordered_map<MetricKey, MetricCell, KeyHash> cells;
  };
  static constexpr size_t kShards = 16;
  std::array<Shard, kShards> shards_;
};

}  // namespace edgecache
