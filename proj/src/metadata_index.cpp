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

#include "edgecache/metadata_index.hpp"

#include <algorithm>

namespace edgecache {

void MetadataIndex::add(PageMetadata meta) {
  std::unique_lock lock(mutex_);
  auto [it, inserted] = universe_.emplace(meta.page_id, meta);
  if (!inserted) {
    throw CacheError(ErrorKind::DuplicatePage,
                     "page already indexed: " + meta.page_id.file_id + "/" +
                         std::to_string(meta.page_id.page_index));
  }
  by_file_[meta.page_id.file_id].insert(meta.page_id);
  by_dir_[meta.dir].insert(meta.page_id);
  dir_bytes_[meta.dir] += meta.length;

  ScopeNode* node = &scope_root_;
  node->subtree_bytes += meta.length;
  node->subtree_pages += 1;
  for (const auto& label : meta.scope.path()) {
    auto& child = node->children[label];
    if (!child) child = std::make_unique<ScopeNode>();
    node = child.get();
    node->subtree_bytes += meta.length;
    node->subtree_pages += 1;
  }
  node->pages_here.insert(meta.page_id);
}

std::optional<PageMetadata> MetadataIndex::remove(const PageId& id) {
  std::unique_lock lock(mutex_);
  auto it = universe_.find(id);
  if (it == universe_.end()) return std::nullopt;
  PageMetadata meta = it->second;
  universe_.erase(it);

  auto file_it = by_file_.find(id.file_id);
  file_it->second.erase(id);
  if (file_it->second.empty()) by_file_.erase(file_it);

  auto dir_it = by_dir_.find(meta.dir);
  dir_it->second.erase(id);
  if (dir_it->second.empty()) by_dir_.erase(dir_it);
  dir_bytes_[meta.dir] -= meta.length;

  // Walk down, then prune emptied nodes on the way back up so partition
  // slots free immediately.
  ScopeNode* node = &scope_root_;
  node->subtree_bytes -= meta.length;
  node->subtree_pages -= 1;
  std::vector<std::pair<ScopeNode*, std::string>> chain;
  for (const auto& label : meta.scope.path()) {
    chain.emplace_back(node, label);
    node = node->children.at(label).get();
    node->subtree_bytes -= meta.length;
    node->subtree_pages -= 1;
  }
  node->pages_here.erase(id);
  for (auto rit = chain.rbegin(); rit != chain.rend(); ++rit) {
    ScopeNode* child = rit->first->children.at(rit->second).get();
    if (child->subtree_pages == 0) {
      rit->first->children.erase(rit->second);
    }
  }
  return meta;
}

std::optional<PageMetadata> MetadataIndex::get(const PageId& id) const {
  std::shared_lock lock(mutex_);
  auto it = universe_.find(id);
  if (it == universe_.end()) return std::nullopt;
  return it->second;
}

bool MetadataIndex::contains(const PageId& id) const {
  std::shared_lock lock(mutex_);
  return universe_.contains(id);
}

void MetadataIndex::touch(const PageId& id, Timestamp now) {
  std::unique_lock lock(mutex_);
  auto it = universe_.find(id);
  if (it != universe_.end()) it->second.last_access_at = now;
}

void MetadataIndex::set_scope(const PageId& id, const Scope& scope) {
  std::optional<PageMetadata> current;
  {
    std::shared_lock lock(mutex_);
    auto it = universe_.find(id);
    if (it == universe_.end() || it->second.scope == scope) return;
    current = it->second;
  }
  remove(id);
  current->scope = scope;
  add(std::move(*current));
}

const MetadataIndex::ScopeNode* MetadataIndex::find_node(const Scope& scope) const {
  const ScopeNode* node = &scope_root_;
  for (const auto& label : scope.path()) {
    auto it = node->children.find(label);
    if (it == node->children.end()) return nullptr;
    node = it->second.get();
  }
  return node;
}

void MetadataIndex::collect(const ScopeNode& node, std::vector<PageMetadata>& out) const {
  for (const auto& id : node.pages_here) {
    out.push_back(universe_.at(id));
  }
  for (const auto& [label, child] : node.children) {
    collect(*child, out);
  }
}

std::vector<PageMetadata> MetadataIndex::pages_by_scope(const Scope& scope) const {
  std::shared_lock lock(mutex_);
  std::vector<PageMetadata> out;
  const ScopeNode* node = find_node(scope);
  if (node) {
    out.reserve(node->subtree_pages);
    collect(*node, out);
  }
  return out;
}

std::vector<PageMetadata> MetadataIndex::pages_by_file(const std::string& file_id) const {
  std::shared_lock lock(mutex_);
  std::vector<PageMetadata> out;
  auto it = by_file_.find(file_id);
  if (it != by_file_.end()) {
    out.reserve(it->second.size());
    for (const auto& id : it->second) out.push_back(universe_.at(id));
  }
  return out;
}

std::vector<PageMetadata> MetadataIndex::pages_by_dir(uint32_t dir) const {
  std::shared_lock lock(mutex_);
  std::vector<PageMetadata> out;
  auto it = by_dir_.find(dir);
  if (it != by_dir_.end()) {
    out.reserve(it->second.size());
    for (const auto& id : it->second) out.push_back(universe_.at(id));
  }
  return out;
}

std::vector<PageMetadata> MetadataIndex::all() const {
  std::shared_lock lock(mutex_);
  std::vector<PageMetadata> out;
  out.reserve(universe_.size());
  for (const auto& [id, meta] : universe_) out.push_back(meta);
  return out;
}

uint64_t MetadataIndex::usage(const Scope& scope) const {
  std::shared_lock lock(mutex_);
  const ScopeNode* node = find_node(scope);
  return node ? node->subtree_bytes : 0;
}

uint64_t MetadataIndex::usage_dir(uint32_t dir) const {
  std::shared_lock lock(mutex_);
  auto it = dir_bytes_.find(dir);
  return it != dir_bytes_.end() ? it->second : 0;
}

size_t MetadataIndex::cached_partition_count(const std::string& schema,
                                             const std::string& table) const {
  std::shared_lock lock(mutex_);
  const ScopeNode* node = find_node(Scope::of({schema, table}));
  if (!node) return 0;
  size_t count = 0;
  for (const auto& [label, child] : node->children) {
    if (child->subtree_pages > 0) ++count;
  }
  return count;
}

bool MetadataIndex::scope_has_pages(const Scope& scope) const {
  std::shared_lock lock(mutex_);
  const ScopeNode* node = find_node(scope);
  return node != nullptr && node->subtree_pages > 0;
}

size_t MetadataIndex::size() const {
  std::shared_lock lock(mutex_);
  return universe_.size();
}

}  // namespace edgecache
