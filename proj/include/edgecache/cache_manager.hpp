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

#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "edgecache/admission.hpp"
#include "edgecache/config.hpp"
#include "edgecache/eviction.hpp"
#include "edgecache/metadata_index.hpp"
#include "edgecache/metrics.hpp"
#include "edgecache/page_store.hpp"
#include "edgecache/quota.hpp"
#include "edgecache/timed_executor.hpp"
#include "edgecache/types.hpp"

namespace edgecache {

enum class PageOutcome { Hit, MissCached, MissBypassed, Fallback };
enum class CacheOutcome { Hit, MissCached, MissBypassed, Fallback };

char outcome_code(PageOutcome outcome);
const char* to_string(CacheOutcome outcome);

struct ReadRequest {
  std::string file;
  uint64_t offset = 0;
  uint64_t length = 0;
  Scope scope;
  std::string run_id;
};

struct ReadResult {
  std::vector<std::byte> data;
  CacheOutcome outcome = CacheOutcome::Hit;
  /// One entry per touched page, in page order.
  std::vector<PageOutcome> page_outcomes;
};

enum class FaultKind { Corrupted, DiskFull, Timeout };

struct FaultAction {
  enum class Kind { EvictedPage, EvictedBatch, LeftInPlace } kind = Kind::LeftInPlace;
  uint64_t freed_bytes = 0;
};

/// Deterministic capacity-weighted directory preference for a file: dirs
/// sorted by rendezvous score capacity / -ln(u), u = hash(file_id, dir).
/// All pages of a file share the order (page affinity); the probability a
/// dir ranks first is proportional to its capacity.
std::vector<uint32_t> dir_preference_order(const std::string& file_id,
                                           const std::vector<uint64_t>& capacities);

/// Orchestrates the read path (hit / read-through miss / admission bypass),
/// directory allocation, quotas, TTL expiry, file invalidation and the
/// failure playbook (timeout fallback, corruption eviction, disk-full early
/// eviction). Bytes returned always match the backing store.
///
/// Concurrency: reads of distinct pages proceed in parallel; concurrent
/// misses on one page coalesce onto a single remote fetch; admission, quota
/// and allocation decisions serialize on one short lock that is never held
/// across remote fetches or page writes.
class CacheManager {
 public:
  CacheManager(CacheConfig config, std::shared_ptr<BackingStore> backing,
               std::shared_ptr<MetricsRegistry> metrics = nullptr);

  /// Serves [offset, offset+length) of the file, reading through on misses.
  /// Throws InvalidRange (length 0 or range beyond end of file) and
  /// BackingUnavailable (remote fetch failed or timed out).
  ReadResult read(const ReadRequest& request);

  /// Picks (and if needed clears) a cache directory for the page: dirs are
  /// tried in capacity-weighted hash order and policy eviction runs within a
  /// dir before falling through. Throws NoSpace when no dir can take it.
  uint32_t allocate(const PageId& id, uint64_t length);

  /// Drops every page of the previous version of the file and switches the
  /// version mapping. Returns pages removed.
  size_t invalidate_file(const std::string& file_name, const std::string& new_version);

  /// Fault absorber. Corrupted: the page is evicted immediately. DiskFull:
  /// evicts a batch (enospc_evict_percent of the dir's used bytes) in the
  /// page's preferred dir. Timeout: counts strikes, evicting the page on the
  /// third consecutive one.
  FaultAction on_fault(const PageId& id, FaultKind fault);

  /// Evicts all pages under the scope (e.g. an outdated partition).
  size_t drop_scope(const Scope& scope);

  /// Evicts expired pages; normally driven internally by the sweep period.
  size_t sweep_ttl();

  const CacheConfig& config() const { return config_; }
  const MetadataIndex& index() const { return index_; }
  PageStore& store() { return store_; }
  MetricsSnapshot metrics_snapshot() const { return metrics_->snapshot(); }
  std::shared_ptr<MetricsRegistry> metrics() { return metrics_; }

 private:
  struct Inflight {
    std::promise<bool> promise;           // value: page ended up cached
    std::shared_future<bool> future;
  };

  Timestamp now() const { return config_.clock(); }

  PageOutcome read_one_page(const std::string& file_id, const ReadRequest& request,
                            uint64_t page_index, uint64_t offset_in_page,
                            std::span<std::byte> out);
  std::vector<std::byte> fetch_page_remote(const std::string& file_name,
                                           uint64_t page_index);
  std::vector<std::byte> fetch_slice_remote(const std::string& file_name,
                                            uint64_t offset, uint64_t length,
                                            bool allow_short = false);
  void timed_local_read(const PageId& id, uint32_t dir, uint64_t offset,
                        std::span<std::byte> out, uint64_t expected_length);

  bool admission_allows(const std::string& file_id, const ReadRequest& request,
                        uint64_t slice_bytes);
  bool reserve_space(const PageId& id, uint64_t length, const Scope& scope,
                     uint32_t* dir_out);
  void release_reservation(const PageId& id, uint64_t length, const Scope& scope,
                           uint32_t dir);
  uint64_t usage_with_pending(const Scope& scope) const;
  uint64_t dir_used_with_pending(uint32_t dir) const;

  bool evict_page(const PageId& id);
  uint64_t evict_in_dir(uint32_t dir, uint64_t bytes_needed);
  void maybe_sweep_ttl();
  void record(MetricKind kind, MetricOp op, const Scope& scope, uint64_t bytes,
              const std::string& run_id, std::optional<ErrorClass> err = {});

  CacheConfig config_;
  std::shared_ptr<BackingStore> backing_;
  std::shared_ptr<MetricsRegistry> metrics_;
  PageStore store_;
  MetadataIndex index_;
  QuotaManager quota_;
  std::optional<BucketTimeRateLimit> rate_limit_;
  std::vector<uint64_t> dir_capacities_;

  // Recursive: eviction (victims under the lock) re-enters via on_remove.
  std::recursive_mutex policy_mutex_;
  std::unique_ptr<EvictionPolicy> policy_;
  TtlTracker ttl_;

  std::mutex decision_mutex_;
  std::unordered_map<std::string, std::string> known_versions_;  // file -> file_id
  std::vector<std::pair<Scope, uint64_t>> pending_scope_bytes_;
  std::unordered_map<uint32_t, uint64_t> pending_dir_bytes_;
  std::mt19937_64 quota_rng_;
  Timestamp last_ttl_sweep_ = 0;

  std::mutex inflight_mutex_;
  std::unordered_map<PageId, std::shared_ptr<Inflight>, PageIdHash> inflight_;

  std::mutex strikes_mutex_;
  std::unordered_map<PageId, uint32_t, PageIdHash> timeout_strikes_;

  TimedExecutor executor_;
};

}  // namespace edgecache
