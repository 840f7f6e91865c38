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
#include <map>
#include <random>
#include <vector>

#include "edgecache/eviction.hpp"
#include "edgecache/metadata_index.hpp"
#include "edgecache/types.hpp"

namespace edgecache {

struct QuotaRule {
  Scope scope;
  uint64_t capacity_bytes = 0;
};

/// One level's overflow. Partition-level (depth 3) demands evict within the
/// partition by policy order; shallower demands pick victims uniformly at
/// random across all pages under the scope.
struct EvictionDemand {
  Scope scope;
  uint64_t bytes_to_free = 0;
  bool random_across_children = false;
};

struct QuotaVerdict {
  bool fits = true;
  /// Most-specific level first.
  std::vector<EvictionDemand> demands;
};

using UsageFn = std::function<uint64_t(const Scope&)>;

/// Hierarchical capacity rules over scopes. Child capacities may
/// deliberately oversubscribe the parent; every ruled level on the path
/// still binds on its own.
class QuotaManager {
 public:
  explicit QuotaManager(std::vector<QuotaRule> rules);

  bool empty() const { return rules_.empty(); }
  const std::map<Scope, uint64_t>& rules() const { return rules_; }

  /// Walks the written page's scope path from most-specific to global and
  /// emits a demand per violated level. Throws ImpossibleFit when `incoming`
  /// alone exceeds some level's capacity.
  QuotaVerdict check(const Scope& scope, uint64_t incoming, const UsageFn& usage) const;

 private:
  std::map<Scope, uint64_t> rules_;
};

/// Frees at least demand.bytes_to_free from the demand's scope (or empties
/// it). `evict` removes one page everywhere (store, index, policy) and
/// returns false if the page was already gone. Random demands consume one
/// rng value per draw over (file_id, page_index)-sorted candidates — the
/// same pinned contract the trace simulator mirrors.
uint64_t execute_eviction(const EvictionDemand& demand, MetadataIndex& index,
                          EvictionPolicy& policy,
                          const std::function<bool(const PageMetadata&)>& evict,
                          std::mt19937_64& rng);

}  // namespace edgecache
