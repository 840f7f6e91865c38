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

#include <functional>
#include <list>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "edgecache/types.hpp"

namespace edgecache {

using PageFilter = std::function<bool(const PageId&)>;

enum class PolicyKind { Lru, Fifo, Random };

PolicyKind policy_kind_from_string(std::string_view name);
const char* to_string(PolicyKind kind);

/// Victim-selection policy. Tracks the set of cached pages and orders them
/// for eviction; victims() returns up to n distinct tracked pages matching
/// the filter (no filter = everything), best victims first.
///
/// Mutations are externally serialized by the cache manager. Exact ordering
/// is guaranteed under single-threaded use; under concurrent on_access the
/// recency order is weakly consistent.
class EvictionPolicy {
 public:
  virtual ~EvictionPolicy() = default;
  virtual void on_insert(const PageId& id) = 0;
  virtual void on_access(const PageId& id) = 0;
  virtual void on_remove(const PageId& id) = 0;
  virtual std::vector<PageId> victims(size_t n, const PageFilter& filter = nullptr) = 0;
  virtual size_t tracked() const = 0;
  virtual PolicyKind kind() const = 0;
};

/// Least-recently-used order; insertion counts as the first access and ties
/// resolve by insertion order.
std::unique_ptr<EvictionPolicy> make_lru_policy();

/// Insertion order, insensitive to accesses.
std::unique_ptr<EvictionPolicy> make_fifo_policy();

/// Uniform draws without replacement. Deterministic under seed with a pinned
/// contract (mirrored by the trace simulator): candidates matching the
/// filter are sorted by (file_id, page_index) and each single draw consumes
/// exactly one engine value, picking index = value % remaining.
std::unique_ptr<EvictionPolicy> make_random_policy(uint64_t seed);

std::unique_ptr<EvictionPolicy> make_policy(PolicyKind kind, uint64_t seed);

/// Time-based expiry, independent of the victim policy. Tracks only pages
/// that carry a TTL; expiry is inclusive (created_at + ttl <= now).
class TtlTracker {
 public:
  void on_insert(const PageId& id, Timestamp created_at, std::optional<DurationMs> ttl);
  void on_remove(const PageId& id);

  /// Removes and returns every expired page; the caller deletes them from
  /// the store, index, and policy. Idempotent at a fixed `now`.
  std::vector<PageId> sweep(Timestamp now);

  size_t tracked() const { return by_page_.size(); }

 private:
  std::multimap<Timestamp, PageId> by_expiry_;
  std::unordered_map<PageId, std::multimap<Timestamp, PageId>::iterator, PageIdHash>
      by_page_;
};

}  // namespace edgecache
