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

#include "edgecache/cache_manager.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>
#include <cmath>

#include "edgecache/hash.hpp"

namespace edgecache {

char outcome_code(PageOutcome outcome) {
  switch (outcome) {
    case PageOutcome::Hit: return 'H';
    case PageOutcome::MissCached: return 'M';
    case PageOutcome::MissBypassed: return 'B';
    case PageOutcome::Fallback: return 'F';
  }
  return '?';
}

const char* to_string(CacheOutcome outcome) {
  switch (outcome) {
    case CacheOutcome::Hit: return "HIT";
    case CacheOutcome::MissCached: return "MISS_CACHED";
    case CacheOutcome::MissBypassed: return "MISS_BYPASSED";
    case CacheOutcome::Fallback: return "FALLBACK";
  }
  return "?";
}

std::vector<uint32_t> dir_preference_order(const std::string& file_id,
                                           const std::vector<uint64_t>& capacities) {
  std::vector<std::pair<double, uint32_t>> scored;
  scored.reserve(capacities.size());
  for (uint32_t i = 0; i < capacities.size(); ++i) {
    double u = u64_to_unit_double(stable_hash64(file_id, 0xD1FULL + i));
    if (u <= 0.0) u = 0x1.0p-53;
    // Weighted rendezvous: P(argmax == i) is proportional to capacity_i.
    double score = static_cast<double>(capacities[i]) / -std::log(u);
    scored.emplace_back(score, i);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<uint32_t> out;
  out.reserve(scored.size());
  for (const auto& [score, dir] : scored) out.push_back(dir);
  return out;
}

namespace {

constexpr int kTimeoutStrikesToEvict = 3;

struct InflightGuard {
  std::function<void(bool)> finish;
  bool resolved = false;
  void resolve(bool cached) {
    if (!resolved) {
      finish(cached);
      resolved = true;
    }
  }
  ~InflightGuard() { resolve(false); }
};

}  // namespace

CacheManager::CacheManager(CacheConfig config, std::shared_ptr<BackingStore> backing,
                           std::shared_ptr<MetricsRegistry> metrics)
    : config_(std::move(config)),
      backing_(std::move(backing)),
      metrics_(metrics ? std::move(metrics) : std::make_shared<MetricsRegistry>()),
      store_([&] {
        config_.validate();
        PageStore::Options opts;
        for (const auto& dir : config_.dirs) opts.dirs.push_back(dir.path);
        opts.page_size = config_.page_size_bytes;
        opts.bucket_count = config_.bucket_count;
        opts.checksums = config_.checksum_pages;
        return PageStore(opts);
      }()),
      quota_(config_.quotas),
      quota_rng_(config_.seed + 1) {
  if (!config_.clock) config_.clock = [] { return system_now_ms(); };
  if (config_.rate_limit) {
    rate_limit_.emplace(config_.rate_limit->window_minutes,
                        config_.rate_limit->threshold);
  }
  for (const auto& dir : config_.dirs) dir_capacities_.push_back(dir.capacity_bytes);
  policy_ = make_policy(config_.eviction_policy, config_.seed);
  last_ttl_sweep_ = now();

  // The directory tree is the source of truth after a restart.
  RestoreResult restored = store_.restore();
  std::vector<size_t> order(restored.records.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (restored.mtimes[a] != restored.mtimes[b]) {
      return restored.mtimes[a] < restored.mtimes[b];
    }
    return restored.records[a].page_id < restored.records[b].page_id;
  });
  for (size_t i : order) {
    const PageRecord& record = restored.records[i];
    PageMetadata meta;
    meta.page_id = record.page_id;
    meta.length = record.length;
    meta.scope = Scope();  // scope is not recoverable from the layout
    meta.dir = record.dir;
    meta.created_at = restored.mtimes[i];
    meta.last_access_at = restored.mtimes[i];
    meta.ttl = config_.default_ttl_ms;
    index_.add(meta);
    std::lock_guard lock(policy_mutex_);
    policy_->on_insert(record.page_id);
    ttl_.on_insert(record.page_id, meta.created_at, meta.ttl);
  }
}

void CacheManager::record(MetricKind kind, MetricOp op, const Scope& scope,
                          uint64_t bytes, const std::string& run_id,
                          std::optional<ErrorClass> err) {
  MetricEvent event;
  event.kind = kind;
  event.op = op;
  event.error_class = err;
  event.scope = scope;
  event.bytes = bytes;
  event.run_id = run_id;
  metrics_->record(event);
}

ReadResult CacheManager::read(const ReadRequest& request) {
  if (request.length == 0) {
    throw CacheError(ErrorKind::InvalidRange, "read length must be >= 1");
  }
  maybe_sweep_ttl();

  const std::string version = backing_->file_version(request.file);
  const std::string file_id = make_file_id(request.file, version);

  // A version change makes the old id unreachable; collect its pages now.
  std::string stale_id;
  {
    std::lock_guard lock(decision_mutex_);
    auto it = known_versions_.find(request.file);
    if (it != known_versions_.end() && it->second != file_id) stale_id = it->second;
    known_versions_[request.file] = file_id;
  }
  if (!stale_id.empty()) {
    for (const auto& meta : index_.pages_by_file(stale_id)) evict_page(meta.page_id);
  }

  const uint64_t page_size = config_.page_size_bytes;
  const uint64_t first_page = request.offset / page_size;
  const uint64_t last_page = (request.offset + request.length - 1) / page_size;

  ReadResult result;
  result.data.resize(request.length);
  result.page_outcomes.reserve(last_page - first_page + 1);

  for (uint64_t page = first_page; page <= last_page; ++page) {
    const uint64_t page_start = page * page_size;
    const uint64_t slice_begin = std::max(request.offset, page_start);
    const uint64_t slice_end =
        std::min(request.offset + request.length, page_start + page_size);
    std::span<std::byte> out(result.data.data() + (slice_begin - request.offset),
                             slice_end - slice_begin);
    result.page_outcomes.push_back(
        read_one_page(file_id, request, page, slice_begin - page_start, out));
  }

  bool any_fallback = false, any_bypass = false, any_cached = false;
  for (PageOutcome outcome : result.page_outcomes) {
    any_fallback |= outcome == PageOutcome::Fallback;
    any_bypass |= outcome == PageOutcome::MissBypassed;
    any_cached |= outcome == PageOutcome::MissCached;
  }
  result.outcome = any_fallback ? CacheOutcome::Fallback
                   : any_bypass ? CacheOutcome::MissBypassed
                   : any_cached ? CacheOutcome::MissCached
                                : CacheOutcome::Hit;
  return result;
}

PageOutcome CacheManager::read_one_page(const std::string& file_id,
                                        const ReadRequest& request, uint64_t page_index,
                                        uint64_t offset_in_page,
                                        std::span<std::byte> out) {
  const PageId id{file_id, page_index};

  for (int attempt = 0; attempt < 4; ++attempt) {
    // Join a fetch already in flight for this page.
    std::shared_ptr<Inflight> flight;
    {
      std::lock_guard lock(inflight_mutex_);
      auto it = inflight_.find(id);
      if (it != inflight_.end()) flight = it->second;
    }
    if (flight) {
      auto deadline = std::chrono::milliseconds(config_.remote_timeout_ms +
                                                config_.read_timeout_ms);
      if (flight->future.wait_for(deadline) != std::future_status::ready) break;
      continue;  // re-examine the index
    }

    auto meta = index_.get(id);
    if (meta) {
      try {
        timed_local_read(id, meta->dir, offset_in_page, out, meta->length);
        index_.touch(id, now());
        if (meta->scope != request.scope) index_.set_scope(id, request.scope);
        {
          std::lock_guard lock(policy_mutex_);
          policy_->on_access(id);
        }
        {
          std::lock_guard lock(strikes_mutex_);
          timeout_strikes_.erase(id);
        }
        record(MetricKind::Hit, MetricOp::Get, request.scope, out.size(),
               request.run_id);
        return PageOutcome::Hit;
      } catch (const CacheError& e) {
        switch (e.kind()) {
          case ErrorKind::Timeout:
            record(MetricKind::Error, MetricOp::Get, request.scope, 0, request.run_id,
                   ErrorClass::Timeout);
            on_fault(id, FaultKind::Timeout);
            break;
          case ErrorKind::Corrupted:
            record(MetricKind::Error, MetricOp::Get, request.scope, 0, request.run_id,
                   ErrorClass::Corrupted);
            on_fault(id, FaultKind::Corrupted);
            break;
          case ErrorKind::NotFound:
          case ErrorKind::IoError:
            record(MetricKind::Error, MetricOp::Get, request.scope, 0, request.run_id,
                   ErrorClass::Io);
            evict_page(id);
            break;
          default:
            throw;
        }
        auto slice = fetch_slice_remote(request.file, page_index * config_.page_size_bytes +
                                                          offset_in_page,
                                        out.size());
        std::copy(slice.begin(), slice.end(), out.begin());
        record(MetricKind::Fallback, MetricOp::Get, request.scope, out.size(),
               request.run_id);
        return PageOutcome::Fallback;
      }
    }

    // Miss: become the fetcher for this page (losing the race means loop
    // back and join the winner).
    auto flight_ptr = std::make_shared<Inflight>();
    flight_ptr->future = flight_ptr->promise.get_future().share();
    {
      std::lock_guard lock(inflight_mutex_);
      auto [it, inserted] = inflight_.emplace(id, flight_ptr);
      if (!inserted) continue;
    }
    InflightGuard guard{[this, &id, flight_ptr](bool cached) {
      {
        std::lock_guard lock(inflight_mutex_);
        inflight_.erase(id);
      }
      flight_ptr->promise.set_value(cached);
    }};

    if (!admission_allows(file_id, request, out.size())) {
      auto slice = fetch_slice_remote(request.file,
                                      page_index * config_.page_size_bytes + offset_in_page,
                                      out.size());
      std::copy(slice.begin(), slice.end(), out.begin());
      record(MetricKind::MissBypassed, MetricOp::Get, request.scope, out.size(),
             request.run_id);
      guard.resolve(false);
      return PageOutcome::MissBypassed;
    }

    auto page_bytes = fetch_page_remote(request.file, page_index);
    if (page_bytes.size() < offset_in_page + out.size()) {
      throw CacheError(ErrorKind::InvalidRange,
                       "requested range extends past end of file " + request.file);
    }

    uint32_t dir = 0;
    bool reserved = reserve_space(id, page_bytes.size(), request.scope, &dir);
    bool cached = false;
    if (reserved) {
      try {
        store_.write_page(id, page_bytes, dir);
        cached = true;
      } catch (const CacheError& e) {
        if (e.kind() == ErrorKind::DiskFull) {
          record(MetricKind::Error, MetricOp::Put, request.scope, 0, request.run_id,
                 ErrorClass::DiskFull);
          on_fault(id, FaultKind::DiskFull);
          try {
            store_.write_page(id, page_bytes, dir);
            cached = true;
          } catch (const CacheError&) {
            // still failing; serve without caching
          }
        } else {
          record(MetricKind::Error, MetricOp::Put, request.scope, 0, request.run_id,
                 ErrorClass::Io);
        }
      }
      if (cached) {
        PageMetadata meta;
        meta.page_id = id;
        meta.length = page_bytes.size();
        meta.scope = request.scope;
        meta.dir = dir;
        meta.created_at = now();
        meta.last_access_at = meta.created_at;
        meta.ttl = config_.default_ttl_ms;
        index_.add(meta);
        {
          std::lock_guard lock(policy_mutex_);
          policy_->on_insert(id);
          ttl_.on_insert(id, meta.created_at, meta.ttl);
        }
      }
      release_reservation(id, page_bytes.size(), request.scope, dir);
    }

    std::copy(page_bytes.begin() + static_cast<ptrdiff_t>(offset_in_page),
              page_bytes.begin() + static_cast<ptrdiff_t>(offset_in_page + out.size()),
              out.begin());
    if (cached) {
      record(MetricKind::MissCached, MetricOp::Get, request.scope, page_bytes.size(),
             request.run_id);
      guard.resolve(true);
      return PageOutcome::MissCached;
    }
    record(MetricKind::MissBypassed, MetricOp::Get, request.scope, out.size(),
           request.run_id);
    guard.resolve(false);
    return PageOutcome::MissBypassed;
  }

  // Pathological contention: serve remote without caching.
  auto slice = fetch_slice_remote(
      request.file, page_index * config_.page_size_bytes + offset_in_page, out.size());
  std::copy(slice.begin(), slice.end(), out.begin());
  record(MetricKind::MissBypassed, MetricOp::Get, request.scope, out.size(),
         request.run_id);
  return PageOutcome::MissBypassed;
}

void CacheManager::timed_local_read(const PageId& id, uint32_t dir, uint64_t offset,
                                    std::span<std::byte> out, uint64_t expected_length) {
  auto buffer = std::make_shared<std::vector<std::byte>>(out.size());
  auto future = executor_.submit([this, id, dir, offset, buffer, expected_length] {
    store_.read_page(id, dir, offset, std::span<std::byte>(*buffer), expected_length);
  });
  if (future.wait_for(std::chrono::milliseconds(config_.read_timeout_ms)) !=
      std::future_status::ready) {
    throw CacheError(ErrorKind::Timeout,
                     "local read of " + id.file_id + "/" +
                         std::to_string(id.page_index) + " exceeded " +
                         std::to_string(config_.read_timeout_ms) + " ms");
  }
  future.get();  // rethrows store errors
  std::copy(buffer->begin(), buffer->end(), out.begin());
}

std::vector<std::byte> CacheManager::fetch_page_remote(const std::string& file_name,
                                                       uint64_t page_index) {
  // A short result here is legitimate: the final page of a file.
  return fetch_slice_remote(file_name, page_index * config_.page_size_bytes,
                            config_.page_size_bytes, /*allow_short=*/true);
}

std::vector<std::byte> CacheManager::fetch_slice_remote(const std::string& file_name,
                                                        uint64_t offset, uint64_t length,
                                                        bool allow_short) {
  auto future = executor_.submit(
      [this, file_name, offset, length] { return backing_->read(file_name, offset, length); });
  if (future.wait_for(std::chrono::milliseconds(config_.remote_timeout_ms)) !=
      std::future_status::ready) {
    throw CacheError(ErrorKind::BackingUnavailable,
                     "remote read of " + file_name + " exceeded " +
                         std::to_string(config_.remote_timeout_ms) + " ms");
  }
  std::vector<std::byte> bytes;
  try {
    bytes = future.get();
  } catch (const std::exception& e) {
    throw CacheError(ErrorKind::BackingUnavailable,
                     "remote read of " + file_name + " failed: " + e.what());
  }
  if (bytes.empty() || (!allow_short && bytes.size() < length)) {
    throw CacheError(ErrorKind::InvalidRange,
                     "read past end of file " + file_name + " at offset " +
                         std::to_string(offset));
  }
  return bytes;
}

bool CacheManager::admission_allows(const std::string& file_id,
                                    const ReadRequest& request, uint64_t slice_bytes) {
  std::lock_guard lock(decision_mutex_);
  if (config_.admission_rules) {
    CachedPartitionView view{
        [this](const std::string& db, const std::string& table) {
          return index_.cached_partition_count(db, table);
        },
        [this](const Scope& scope) { return index_.scope_has_pages(scope); }};
    if (!admit_static(*config_.admission_rules, request.scope, view)) {
      record(MetricKind::AdmitRejectStatic, MetricOp::Get, request.scope, slice_bytes,
             request.run_id);
      return false;
    }
  }
  if (rate_limit_) {
    // The file is the hotness unit: every page miss of it counts one access.
    rate_limit_->record_access(file_id, now());
    if (!rate_limit_->should_admit(file_id, now())) {
      record(MetricKind::AdmitRejectRate, MetricOp::Get, request.scope, slice_bytes,
             request.run_id);
      return false;
    }
  }
  return true;
}

uint64_t CacheManager::usage_with_pending(const Scope& scope) const {
  uint64_t total = index_.usage(scope);
  for (const auto& [pending_scope, bytes] : pending_scope_bytes_) {
    if (scope.contains(pending_scope)) total += bytes;
  }
  return total;
}

uint64_t CacheManager::dir_used_with_pending(uint32_t dir) const {
  uint64_t total = index_.usage_dir(dir);
  auto it = pending_dir_bytes_.find(dir);
  if (it != pending_dir_bytes_.end()) total += it->second;
  return total;
}

bool CacheManager::reserve_space(const PageId& id, uint64_t length, const Scope& scope,
                                 uint32_t* dir_out) {
  std::lock_guard lock(decision_mutex_);
  auto evict_cb = [this](const PageMetadata& victim) { return evict_page(victim.page_id); };
  UsageFn usage = [this](const Scope& s) { return usage_with_pending(s); };

  // Reserve-then-write: every ruled level on the scope path is brought under
  // capacity before the page lands.
  for (int iter = 0; iter < 32; ++iter) {
    QuotaVerdict verdict;
    try {
      verdict = quota_.check(scope, length, usage);
    } catch (const CacheError& e) {
      if (e.kind() == ErrorKind::ImpossibleFit) return false;
      throw;
    }
    if (verdict.fits) break;
    uint64_t freed;
    {
      std::lock_guard policy_lock(policy_mutex_);
      freed = execute_eviction(verdict.demands.front(), index_, *policy_, evict_cb,
                               quota_rng_);
    }
    if (freed == 0) return false;
  }
  try {
    if (!quota_.check(scope, length, usage).fits) return false;
  } catch (const CacheError&) {
    return false;
  }

  // Capacity-weighted dir choice with policy eviction before fallthrough.
  auto order = dir_preference_order(id.file_id, dir_capacities_);
  for (uint32_t dir : order) {
    const uint64_t capacity = dir_capacities_[dir];
    if (length > capacity) continue;
    while (dir_used_with_pending(dir) + length > capacity) {
      if (evict_in_dir(dir, dir_used_with_pending(dir) + length - capacity) == 0) break;
    }
    if (dir_used_with_pending(dir) + length <= capacity) {
      pending_dir_bytes_[dir] += length;
      pending_scope_bytes_.emplace_back(scope, length);
      *dir_out = dir;
      return true;
    }
  }
  return false;
}

void CacheManager::release_reservation(const PageId&, uint64_t length,
                                       const Scope& scope, uint32_t dir) {
  std::lock_guard lock(decision_mutex_);
  auto it = pending_dir_bytes_.find(dir);
  if (it != pending_dir_bytes_.end()) {
    it->second -= std::min(it->second, length);
    if (it->second == 0) pending_dir_bytes_.erase(it);
  }
  for (auto entry = pending_scope_bytes_.begin(); entry != pending_scope_bytes_.end();
       ++entry) {
    if (entry->first == scope && entry->second == length) {
      pending_scope_bytes_.erase(entry);
      break;
    }
  }
}

uint32_t CacheManager::allocate(const PageId& id, uint64_t length) {
  std::lock_guard lock(decision_mutex_);
  auto order = dir_preference_order(id.file_id, dir_capacities_);
  for (uint32_t dir : order) {
    const uint64_t capacity = dir_capacities_[dir];
    if (length > capacity) continue;
    while (dir_used_with_pending(dir) + length > capacity) {
      if (evict_in_dir(dir, dir_used_with_pending(dir) + length - capacity) == 0) break;
    }
    if (dir_used_with_pending(dir) + length <= capacity) return dir;
  }
  throw CacheError(ErrorKind::NoSpace,
                   "no cache directory can hold " + std::to_string(length) + " bytes");
}

uint64_t CacheManager::evict_in_dir(uint32_t dir, uint64_t bytes_needed) {
  uint64_t freed = 0;
  std::lock_guard lock(policy_mutex_);
  while (freed < bytes_needed) {
    auto victims = policy_->victims(1, [&](const PageId& victim) {
      auto meta = index_.get(victim);
      return meta && meta->dir == dir;
    });
    if (victims.empty()) break;
    auto meta = index_.get(victims.front());
    if (!meta) break;
    if (!evict_page(victims.front())) break;
    freed += meta->length;
  }
  return freed;
}

bool CacheManager::evict_page(const PageId& id) {
  auto meta = index_.remove(id);
  if (!meta) return false;
  {
    std::lock_guard lock(policy_mutex_);
    policy_->on_remove(id);
    ttl_.on_remove(id);
  }
  {
    std::lock_guard lock(strikes_mutex_);
    timeout_strikes_.erase(id);
  }
  try {
    store_.delete_page(id, meta->dir);
  } catch (const CacheError&) {
    record(MetricKind::Error, MetricOp::Delete, meta->scope, 0, "", ErrorClass::Io);
  }
  record(MetricKind::Evict, MetricOp::Delete, meta->scope, meta->length, "");
  return true;
}

FaultAction CacheManager::on_fault(const PageId& id, FaultKind fault) {
  switch (fault) {
    case FaultKind::Corrupted: {
      bool evicted = evict_page(id);
      return FaultAction{evicted ? FaultAction::Kind::EvictedPage
                                 : FaultAction::Kind::LeftInPlace,
                         0};
    }
    case FaultKind::DiskFull: {
      uint32_t dir = 0;
      if (auto meta = index_.get(id)) {
        dir = meta->dir;
      } else {
        dir = dir_preference_order(id.file_id, dir_capacities_).front();
      }
      const uint64_t used = index_.usage_dir(dir);
      uint64_t batch = used * config_.enospc_evict_percent / 100;
      if (batch == 0) batch = std::min<uint64_t>(used, config_.page_size_bytes);
      uint64_t freed;
      {
        std::lock_guard lock(decision_mutex_);
        freed = evict_in_dir(dir, batch);
      }
      return FaultAction{FaultAction::Kind::EvictedBatch, freed};
    }
    case FaultKind::Timeout: {
      uint32_t strikes = 0;
      {
        std::lock_guard lock(strikes_mutex_);
        strikes = ++timeout_strikes_[id];
      }
      if (strikes >= kTimeoutStrikesToEvict) {
        bool evicted = evict_page(id);
        return FaultAction{evicted ? FaultAction::Kind::EvictedPage
                                   : FaultAction::Kind::LeftInPlace,
                           0};
      }
      return FaultAction{FaultAction::Kind::LeftInPlace, 0};
    }
  }
  return FaultAction{};
}

size_t CacheManager::invalidate_file(const std::string& file_name,
                                     const std::string& new_version) {
  const std::string new_id = make_file_id(file_name, new_version);
  std::string old_id;
  {
    std::lock_guard lock(decision_mutex_);
    auto it = known_versions_.find(file_name);
    if (it != known_versions_.end() && it->second != new_id) old_id = it->second;
    known_versions_[file_name] = new_id;
  }
  if (old_id.empty()) return 0;
  size_t dropped = 0;
  for (const auto& meta : index_.pages_by_file(old_id)) {
    if (evict_page(meta.page_id)) ++dropped;
  }
  return dropped;
}

size_t CacheManager::drop_scope(const Scope& scope) {
  size_t dropped = 0;
  for (const auto& meta : index_.pages_by_scope(scope)) {
    if (evict_page(meta.page_id)) ++dropped;
  }
  return dropped;
}

size_t CacheManager::sweep_ttl() {
  std::vector<PageId> expired;
  {
    std::lock_guard lock(policy_mutex_);
    expired = ttl_.sweep(now());
  }
  size_t evicted = 0;
  for (const auto& id : expired) {
    if (evict_page(id)) ++evicted;
  }
  return evicted;
}

void CacheManager::maybe_sweep_ttl() {
  bool due = false;
  {
    std::lock_guard lock(decision_mutex_);
    Timestamp current = now();
    if (current - last_ttl_sweep_ >= config_.ttl_sweep_period_ms) {
      last_ttl_sweep_ = current;
      due = true;
    }
  }
  if (due) sweep_ttl();
}

}  // namespace edgecache
