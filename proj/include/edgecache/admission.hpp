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
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "edgecache/types.hpp"

namespace edgecache {

/// Static allow-list filter: only listed (database, table) pairs are
/// cache-worthy, optionally capped by the number of concurrently cached
/// partitions per table.
struct TableRule {
  std::string name;
  std::optional<uint32_t> max_cached_partitions;
};

struct DatabaseRule {
  std::string name;
  std::vector<TableRule> tables;
};

struct AdmissionRuleSet {
  std::vector<DatabaseRule> databases;

  /// Parses {"databases": [{"name", "tables": [{"name",
  /// "maxCachedPartitions"}]}]}. Unknown keys are a parse error naming the
  /// offending key; duplicate (database, table) pairs are rejected.
  static AdmissionRuleSet parse_json(const std::string& json_text);

  const TableRule* find(const std::string& db, const std::string& table) const;
};

/// Callbacks the static filter uses to observe current cache contents.
struct CachedPartitionView {
  std::function<size_t(const std::string& db, const std::string& table)>
      partition_count;
  std::function<bool(const Scope&)> partition_is_cached;
};

/// True iff (db, table) is listed and either no cap applies, this partition
/// is already cached (re-access never flips to rejected), or a slot is free.
/// Scopes shallower than [schema, table] are never admitted.
bool admit_static(const AdmissionRuleSet& rules, const Scope& scope,
                  const CachedPartitionView& view);

/// Sliding-window frequency gate: a block is cache-worthy once it has been
/// accessed more than `threshold` times in the last `window_minutes`
/// minutes. Counts live in per-minute buckets (minute = floor(ms / 60000));
/// the oldest bucket drops every minute, so state is at most window_minutes
/// buckets and blocks idle across the whole window occupy no memory.
///
/// The current access is recorded before the admission check (callers do
/// record_access then should_admit).
class BucketTimeRateLimit {
 public:
  BucketTimeRateLimit(uint32_t window_minutes, uint64_t threshold);

  void record_access(const std::string& block_id, Timestamp now);

  /// Pure: sums live-bucket counts (stamps in (minute(now) - window,
  /// minute(now)]) and compares strictly against the threshold.
  bool should_admit(const std::string& block_id, Timestamp now) const;

  uint32_t window_minutes() const { return window_minutes_; }
  uint64_t threshold() const { return threshold_; }
  size_t live_buckets() const;

 private:
  uint32_t window_minutes_;
  uint64_t threshold_;
  mutable std::mutex mutex_;
  std::deque<std::pair<int64_t, std::unordered_map<std::string, uint64_t>>> buckets_;
};

}  // namespace edgecache
