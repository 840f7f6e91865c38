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

#include "edgecache/quota.hpp"

#include <algorithm>

namespace edgecache {

QuotaManager::QuotaManager(std::vector<QuotaRule> rules) {
  for (auto& rule : rules) {
    if (rule.capacity_bytes == 0) {
      throw CacheError(ErrorKind::ParseError,
                       "quota capacity must be positive for scope '" +
                           rule.scope.str() + "'");
    }
    if (!rules_.emplace(rule.scope, rule.capacity_bytes).second) {
      throw CacheError(ErrorKind::ParseError,
                       "duplicate quota rule for scope '" + rule.scope.str() + "'");
    }
  }
}

QuotaVerdict QuotaManager::check(const Scope& scope, uint64_t incoming,
                                 const UsageFn& usage) const {
  QuotaVerdict verdict;
  if (rules_.empty()) return verdict;

  // Most detailed level first, ascending to global.
  for (size_t depth = scope.depth() + 1; depth-- > 0;) {
    Scope level = scope.truncated(depth);
    auto it = rules_.find(level);
    if (it == rules_.end()) continue;
    const uint64_t capacity = it->second;
    if (incoming > capacity) {
      throw CacheError(ErrorKind::ImpossibleFit,
                       "incoming " + std::to_string(incoming) +
                           " bytes exceed capacity " + std::to_string(capacity) +
                           " of scope '" + level.str() + "'");
    }
    const uint64_t used = usage(level);
    if (used + incoming > capacity) {
      verdict.fits = false;
      verdict.demands.push_back(EvictionDemand{
          level, used + incoming - capacity, level.depth() < kMaxScopeDepth});
    }
  }
  return verdict;
}

uint64_t execute_eviction(const EvictionDemand& demand, MetadataIndex& index,
                          EvictionPolicy& policy,
                          const std::function<bool(const PageMetadata&)>& evict,
                          std::mt19937_64& rng) {
  uint64_t freed = 0;
  if (demand.random_across_children) {
    auto candidates = index.pages_by_scope(demand.scope);
    std::sort(candidates.begin(), candidates.end(),
              [](const PageMetadata& a, const PageMetadata& b) {
                return a.page_id < b.page_id;
              });
    while (freed < demand.bytes_to_free && !candidates.empty()) {
      size_t idx = static_cast<size_t>(rng() % candidates.size());
      PageMetadata victim = candidates[idx];
      candidates.erase(candidates.begin() + static_cast<ptrdiff_t>(idx));
      if (evict(victim)) freed += victim.length;
    }
    return freed;
  }

  while (freed < demand.bytes_to_free) {
    auto victims = policy.victims(1, [&](const PageId& id) {
      auto meta = index.get(id);
      return meta && demand.scope.contains(meta->scope);
    });
    if (victims.empty()) break;
    auto meta = index.get(victims.front());
    if (!meta) break;
    if (evict(*meta)) freed += meta->length;
  }
  return freed;
}

}  // namespace edgecache
