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

#include "edgecache/eviction.hpp"

#include <algorithm>

namespace edgecache {

PolicyKind policy_kind_from_string(std::string_view name) {
  if (name == "lru") return PolicyKind::Lru;
  if (name == "fifo") return PolicyKind::Fifo;
  if (name == "random") return PolicyKind::Random;
  throw CacheError(ErrorKind::ParseError,
                   "unknown eviction policy '" + std::string(name) +
                       "' (expected lru | fifo | random)");
}

const char* to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Lru: return "lru";
    case PolicyKind::Fifo: return "fifo";
    case PolicyKind::Random: return "random";
  }
  return "?";
}

namespace {

/// Shared machinery for the two list-ordered policies. The list runs from
/// best victim (front) to most recently relevant (back).
class ListOrderedPolicy : public EvictionPolicy {
 public:
  explicit ListOrderedPolicy(bool reorder_on_access, PolicyKind kind)
      : reorder_on_access_(reorder_on_access), kind_(kind) {}

  void on_insert(const PageId& id) override {
    if (index_.contains(id)) return;
    order_.push_back(id);
    index_[id] = std::prev(order_.end());
  }

  void on_access(const PageId& id) override {
    if (!reorder_on_access_) return;
    auto it = index_.find(id);
    if (it == index_.end()) return;
    order_.splice(order_.end(), order_, it->second);
  }

  void on_remove(const PageId& id) override {
    auto it = index_.find(id);
    if (it == index_.end()) return;
    order_.erase(it->second);
    index_.erase(it);
  }

  std::vector<PageId> victims(size_t n, const PageFilter& filter) override {
    std::vector<PageId> out;
    for (const auto& id : order_) {
      if (out.size() >= n) break;
      if (!filter || filter(id)) out.push_back(id);
    }
    return out;
  }

  size_t tracked() const override { return index_.size(); }
  PolicyKind kind() const override { return kind_; }

 private:
  bool reorder_on_access_;
  PolicyKind kind_;
  std::list<PageId> order_;
  std::unordered_map<PageId, std::list<PageId>::iterator, PageIdHash> index_;
};

class RandomPolicy : public EvictionPolicy {
 public:
  explicit RandomPolicy(uint64_t seed) : rng_(seed) {}

  void on_insert(const PageId& id) override { tracked_.insert(id); }
  void on_access(const PageId&) override {}
  void on_remove(const PageId& id) override { tracked_.erase(id); }

  std::vector<PageId> victims(size_t n, const PageFilter& filter) override {
    std::vector<PageId> candidates;
    candidates.reserve(tracked_.size());
    for (const auto& id : tracked_) {
      if (!filter || filter(id)) candidates.push_back(id);
    }
    std::sort(candidates.begin(), candidates.end());
    std::vector<PageId> out;
    while (out.size() < n && !candidates.empty()) {
      size_t idx = static_cast<size_t>(rng_() % candidates.size());
      out.push_back(candidates[idx]);
      candidates.erase(candidates.begin() + static_cast<ptrdiff_t>(idx));
    }
    return out;
  }

  size_t tracked() const override { return tracked_.size(); }
  PolicyKind kind() const override { return PolicyKind::Random; }

 private:
  std::mt19937_64 rng_;
  std::unordered_set<PageId, PageIdHash> tracked_;
};

}  // namespace

std::unique_ptr<EvictionPolicy> make_lru_policy() {
  return std::make_unique<ListOrderedPolicy>(true, PolicyKind::Lru);
}

std::unique_ptr<EvictionPolicy> make_fifo_policy() {
  return std::make_unique<ListOrderedPolicy>(false, PolicyKind::Fifo);
}

std::unique_ptr<EvictionPolicy> make_random_policy(uint64_t seed) {
  return std::make_unique<RandomPolicy>(seed);
}

std::unique_ptr<EvictionPolicy> make_policy(PolicyKind kind, uint64_t seed) {
  switch (kind) {
    case PolicyKind::Lru: return make_lru_policy();
    case PolicyKind::Fifo: return make_fifo_policy();
    case PolicyKind::Random: return make_random_policy(seed);
  }
  throw CacheError(ErrorKind::ParseError, "bad policy kind");
}

void TtlTracker::on_insert(const PageId& id, Timestamp created_at,
                           std::optional<DurationMs> ttl) {
  if (!ttl) return;
  on_remove(id);
  auto it = by_expiry_.emplace(created_at + *ttl, id);
  by_page_[id] = it;
}

void TtlTracker::on_remove(const PageId& id) {
  auto it = by_page_.find(id);
  if (it == by_page_.end()) return;
  by_expiry_.erase(it->second);
  by_page_.erase(it);
}

std::vector<PageId> TtlTracker::sweep(Timestamp now) {
  std::vector<PageId> expired;
  auto it = by_expiry_.begin();
  while (it != by_expiry_.end() && it->first <= now) {
    expired.push_back(it->second);
    by_page_.erase(it->second);
    it = by_expiry_.erase(it);
  }
  return expired;
}

}  // namespace edgecache
