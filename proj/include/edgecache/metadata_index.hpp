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
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "edgecache/types.hpp"

namespace edgecache {

struct PageMetadata {
  PageId page_id;
  uint64_t length = 0;
  Scope scope;
  uint32_t dir = 0;
  Timestamp created_at = 0;
  Timestamp last_access_at = 0;
  std::optional<DurationMs> ttl;
};

/// In-memory registry of all page metadata: a universe set plus subsets
/// indexed by file id, storage directory, and the scope hierarchy. Ancestor
/// scopes are answered through a scope tree with per-node usage counters, so
/// lookups cost O(result) and usage() is O(depth).
///
/// Thread safety: reads are shared, mutations exclusive; bulk queries copy a
/// consistent snapshot under the lock. The index never performs I/O.
class MetadataIndex {
 public:
  MetadataIndex() = default;

  /// Throws DuplicatePage if the id is present; replacing requires remove().
  void add(PageMetadata meta);

  std::optional<PageMetadata> remove(const PageId& id);

  std::optional<PageMetadata> get(const PageId& id) const;
  bool contains(const PageId& id) const;

  /// Updates last_access_at; no-op for unknown pages.
  void touch(const PageId& id, Timestamp now);

  /// Re-scopes a page in place; no-op for unknown pages.
  void set_scope(const PageId& id, const Scope& scope);

  /// Pages whose most-specific scope lies under `scope` (prefix match).
  std::vector<PageMetadata> pages_by_scope(const Scope& scope) const;
  std::vector<PageMetadata> pages_by_file(const std::string& file_id) const;
  std::vector<PageMetadata> pages_by_dir(uint32_t dir) const;
  std::vector<PageMetadata> all() const;

  uint64_t usage(const Scope& scope) const;
  uint64_t usage_dir(uint32_t dir) const;

  /// Number of distinct partition scopes with cached pages under
  /// (schema, table). Feeds the maxCachedPartitions admission cap.
  size_t cached_partition_count(const std::string& schema,
                                const std::string& table) const;
  bool scope_has_pages(const Scope& scope) const;

  size_t size() const;

 private:
  struct ScopeNode {
    uint64_t subtree_bytes = 0;
    size_t subtree_pages = 0;
    std::unordered_set<PageId, PageIdHash> pages_here;
    std::map<std::string, std::unique_ptr<ScopeNode>> children;
  };

  const ScopeNode* find_node(const Scope& scope) const;
  void collect(const ScopeNode& node, std::vector<PageMetadata>& out) const;

  mutable std::shared_mutex mutex_;
  std::unordered_map<PageId, PageMetadata, PageIdHash> universe_;
  std::unordered_map<std::string, std::unordered_set<PageId, PageIdHash>> by_file_;
  std::unordered_map<uint32_t, std::unordered_set<PageId, PageIdHash>> by_dir_;
  std::unordered_map<uint32_t, uint64_t> dir_bytes_;
  ScopeNode scope_root_;
};

}  // namespace edgecache
