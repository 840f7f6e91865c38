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

#include "edgecache/affinity_scheduler.hpp"

#include <algorithm>

#include "edgecache/hash.hpp"

namespace edgecache {

const char* to_string(AssignmentChoice choice) {
  switch (choice) {
    case AssignmentChoice::Primary: return "PRIMARY";
    case AssignmentChoice::Secondary: return "SECONDARY";
    case AssignmentChoice::Fallback: return "FALLBACK";
  }
  return "?";
}

HashRing::HashRing(uint32_t virtual_points_per_node, DurationMs grace_ms)
    : virtual_points_(virtual_points_per_node), grace_ms_(grace_ms) {
  if (virtual_points_ == 0) {
    throw CacheError(ErrorKind::ParseError, "virtual points per node must be positive");
  }
}

void HashRing::add_node(const std::string& node_id) {
  if (nodes_.contains(node_id)) return;
  nodes_[node_id] = true;
  for (uint32_t i = 0; i < virtual_points_; ++i) {
    uint64_t point = stable_hash64(node_id + "#" + std::to_string(i));
    ring_[{point, node_id}] = true;
  }
}

bool HashRing::has_node(const std::string& node_id) const {
  return nodes_.contains(node_id);
}

void HashRing::node_leave(const std::string& node_id, Timestamp now) {
  if (!nodes_.contains(node_id)) {
    throw CacheError(ErrorKind::UnknownNode, "node_leave: unknown node " + node_id);
  }
  offline_deadline_[node_id] = now + grace_ms_;
}

void HashRing::node_return(const std::string& node_id, Timestamp) {
  if (!nodes_.contains(node_id)) {
    throw CacheError(ErrorKind::UnknownNode, "node_return: unknown node " + node_id);
  }
  offline_deadline_.erase(node_id);
}

void HashRing::expire_grace(Timestamp now) {
  for (auto it = offline_deadline_.begin(); it != offline_deadline_.end();) {
    if (it->second > now) {
      ++it;
      continue;
    }
    const std::string node_id = it->first;
    it = offline_deadline_.erase(it);
    nodes_.erase(node_id);
    for (uint32_t i = 0; i < virtual_points_; ++i) {
      uint64_t point = stable_hash64(node_id + "#" + std::to_string(i));
      ring_.erase({point, node_id});
    }
  }
}

bool HashRing::in_grace(const std::string& node_id) const {
  return offline_deadline_.contains(node_id);
}

std::vector<std::string> HashRing::preferred_nodes(const std::string& file_name,
                                                   size_t replicas) const {
  if (ring_.empty()) {
    throw CacheError(ErrorKind::RingEmpty, "hash ring has no nodes");
  }
  replicas = std::min<size_t>(std::max<size_t>(replicas, 1), 2);
  const uint64_t h = stable_hash64(file_name);
  std::vector<std::string> out;
  auto it = ring_.lower_bound({h, std::string()});
  for (size_t steps = 0; steps < ring_.size() && out.size() < replicas; ++steps) {
    if (it == ring_.end()) it = ring_.begin();
    const std::string& node = it->first.second;
    if (std::find(out.begin(), out.end(), node) == out.end()) {
      out.push_back(node);
    }
    ++it;
  }
  return out;
}

std::vector<std::string> HashRing::live_nodes() const {
  std::vector<std::string> out;
  for (const auto& [node, _] : nodes_) out.push_back(node);
  return out;
}

Assignment assign_split(const HashRing& ring, const std::string& file_name,
                        const std::unordered_map<std::string, WorkerLoad>& loads) {
  auto busy = [&](const std::string& node) {
    if (ring.in_grace(node)) return true;
    auto it = loads.find(node);
    return it == loads.end() || it->second.busy();
  };

  auto preferred = ring.preferred_nodes(file_name, 2);
  if (!busy(preferred[0])) {
    return Assignment{preferred[0], true, AssignmentChoice::Primary};
  }
  if (preferred.size() > 1 && !busy(preferred[1])) {
    return Assignment{preferred[1], true, AssignmentChoice::Secondary};
  }

  // Least burdened worker, preferring non-busy ones; never a node in grace.
  std::string best;
  uint64_t best_burden = 0;
  bool best_busy = true;
  for (const auto& node : ring.live_nodes()) {
    if (ring.in_grace(node)) continue;
    auto it = loads.find(node);
    if (it == loads.end()) continue;
    const uint64_t burden =
        static_cast<uint64_t>(it->second.assigned_splits) + it->second.pending_splits;
    const bool node_busy = it->second.busy();
    bool better = best.empty() || (!node_busy && best_busy) ||
                  (node_busy == best_busy &&
                   (burden < best_burden || (burden == best_burden && node < best)));
    if (better) {
      best = node;
      best_burden = burden;
      best_busy = node_busy;
    }
  }
  if (best.empty()) {
    throw CacheError(ErrorKind::RingEmpty, "no live candidate nodes for fallback");
  }
  return Assignment{best, false, AssignmentChoice::Fallback};
}

}  // namespace edgecache
