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
#include <string>
#include <unordered_map>
#include <vector>

#include "edgecache/types.hpp"

namespace edgecache {

constexpr uint32_t kDefaultVirtualPointsPerNode = 100;
constexpr DurationMs kDefaultGraceMs = 10 * 60 * 1000;

/// Consistent-hash ring keyed by file, with a grace window for nodes that go
/// offline briefly: their points stay on the ring (so nothing remaps) but
/// assignment treats them as busy until either they return or the grace
/// deadline passes and expire_grace() drops them.
///
/// Pure decision structure: mutations are externally serialized, decision
/// calls are const and safe to run concurrently.
class HashRing {
 public:
  explicit HashRing(uint32_t virtual_points_per_node = kDefaultVirtualPointsPerNode,
                    DurationMs grace_ms = kDefaultGraceMs);

  void add_node(const std::string& node_id);
  bool has_node(const std::string& node_id) const;
  size_t node_count() const { return nodes_.size(); }

  /// Marks the node offline until now + grace. Its files keep mapping to it.
  void node_leave(const std::string& node_id, Timestamp now);

  /// Clears the offline mark; a return within grace changes nothing
  /// observable about the ring.
  void node_return(const std::string& node_id, Timestamp now);

  /// Drops the points of every node whose grace deadline has passed.
  void expire_grace(Timestamp now);

  bool in_grace(const std::string& node_id) const;

  /// First `replicas` (1 or 2) distinct nodes clockwise from hash(file).
  /// In-grace nodes still own their points and are returned here; busyness
  /// handling is assign_split's job. Throws RingEmpty.
  std::vector<std::string> preferred_nodes(const std::string& file_name,
                                           size_t replicas) const;

  std::vector<std::string> live_nodes() const;

 private:
  uint32_t virtual_points_;
  DurationMs grace_ms_;
  std::map<std::pair<uint64_t, std::string>, bool> ring_;  // (point, node) -> exists
  std::unordered_map<std::string, Timestamp> offline_deadline_;
  std::map<std::string, bool> nodes_;
};

struct WorkerLoad {
  uint32_t assigned_splits = 0;
  uint32_t pending_splits = 0;
  uint32_t max_splits_per_node = 0;
  uint32_t max_pending_splits_per_task = 0;

  bool busy() const {
    return assigned_splits >= max_splits_per_node ||
           pending_splits >= max_pending_splits_per_task;
  }
};

enum class AssignmentChoice { Primary, Secondary, Fallback };

const char* to_string(AssignmentChoice choice);

struct Assignment {
  std::string node_id;
  bool cache_enabled = true;
  AssignmentChoice choice = AssignmentChoice::Primary;
};

/// Soft-affinity assignment: primary from the ring if it has headroom, else
/// secondary, else the least burdened worker (preferring non-busy ones,
/// ties by node id) with caching bypassed. In-grace nodes count as busy.
/// `loads` must cover all live nodes. Deterministic for fixed inputs.
Assignment assign_split(const HashRing& ring, const std::string& file_name,
                        const std::unordered_map<std::string, WorkerLoad>& loads);

}  // namespace edgecache
