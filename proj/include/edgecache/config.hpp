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
#include <optional>
#include <string>
#include <vector>

#include "edgecache/admission.hpp"
#include "edgecache/eviction.hpp"
#include "edgecache/quota.hpp"
#include "edgecache/types.hpp"

namespace edgecache {

struct DirConfig {
  std::filesystem::path path;
  uint64_t capacity_bytes = 0;
};

struct RateLimitConfig {
  uint32_t window_minutes = 10;
  uint64_t threshold = 15;
};

struct CacheConfig {
  uint64_t page_size_bytes = 1 << 20;
  std::vector<DirConfig> dirs;
  PolicyKind eviction_policy = PolicyKind::Lru;
  DurationMs read_timeout_ms = 10'000;
  DurationMs remote_timeout_ms = 30'000;
  std::optional<DurationMs> default_ttl_ms;
  DurationMs ttl_sweep_period_ms = 60'000;
  std::optional<AdmissionRuleSet> admission_rules;
  std::optional<RateLimitConfig> rate_limit;
  std::vector<QuotaRule> quotas;
  uint32_t bucket_count = 1000;
  bool checksum_pages = false;
  /// Share of a directory's used bytes evicted when the device reports
  /// "no space left", before the write retries.
  uint32_t enospc_evict_percent = 5;
  uint64_t seed = 0;
  /// Injectable time source; defaults to the system clock when unset.
  Clock clock;

  void validate() const;

  /// Parses the single-document JSON form: cache keys (page_size_bytes,
  /// dirs, eviction_policy, read_timeout_ms, default_ttl_s, quotas, ...)
  /// plus the static admission "databases" schema at top level. Unknown
  /// keys are a parse error naming the key.
  static CacheConfig parse_json(const std::string& json_text);
  static CacheConfig load_file(const std::filesystem::path& path);
};

}  // namespace edgecache
