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

#include "edgecache/metrics.hpp"

#include <algorithm>
#include <map>

#include <json.hpp>

#include "edgecache/hash.hpp"

namespace edgecache {

const char* to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::Hit: return "HIT";
    case MetricKind::MissCached: return "MISS_CACHED";
    case MetricKind::MissBypassed: return "MISS_BYPASSED";
    case MetricKind::Fallback: return "FALLBACK";
    case MetricKind::Evict: return "EVICT";
    case MetricKind::AdmitRejectStatic: return "ADMIT_REJECT_STATIC";
    case MetricKind::AdmitRejectRate: return "ADMIT_REJECT_RATE";
    case MetricKind::Error: return "ERROR";
  }
  return "?";
}

const char* to_string(MetricOp op) {
  switch (op) {
    case MetricOp::Get: return "GET";
    case MetricOp::Put: return "PUT";
    case MetricOp::Delete: return "DELETE";
  }
  return "?";
}

const char* to_string(ErrorClass err) {
  switch (err) {
    case ErrorClass::Timeout: return "Timeout";
    case ErrorClass::Corrupted: return "Corrupted";
    case ErrorClass::DiskFull: return "DiskFull";
    case ErrorClass::Io: return "Io";
  }
  return "?";
}

namespace {

bool is_read_outcome(MetricKind kind) {
  return kind == MetricKind::Hit || kind == MetricKind::MissCached ||
         kind == MetricKind::MissBypassed || kind == MetricKind::Fallback;
}

}  // namespace

size_t MetricsRegistry::KeyHash::operator()(const MetricKey& key) const {
  uint64_t h = stable_hash64(key.scope, static_cast<uint64_t>(key.kind) * 131 +
                                            static_cast<uint64_t>(key.op) * 17 +
                                            (key.error_class
                                                 ? static_cast<uint64_t>(*key.error_class) + 1
                                                 : 0));
  return static_cast<size_t>(stable_hash64(key.run_id, h));
}

void MetricsRegistry::record(const MetricEvent& event) {
  MetricKey key{event.kind, event.op,
                event.kind == MetricKind::Error ? event.error_class : std::nullopt,
                event.scope.str(), event.run_id};
  Shard& shard = shards_[KeyHash{}(key) % kShards];
  std::lock_guard lock(shard.mutex);
  MetricCell& cell = shard.cells[key];
  cell.count += 1;
  cell.bytes += event.bytes;
}

MetricsSnapshot MetricsRegistry::snapshot() const {
  std::vector<std::pair<MetricKey, MetricCell>> rows;
  for (const auto& shard : shards_) {
    std::lock_guard lock(shard.mutex);
    for (const auto& [key, cell] : shard.cells) rows.emplace_back(key, cell);
  }
  return MetricsSnapshot(std::move(rows));
}

MetricsSnapshot::MetricsSnapshot(std::vector<std::pair<MetricKey, MetricCell>> rows)
    : rows_(std::move(rows)) {
  std::sort(rows_.begin(), rows_.end(), [](const auto& a, const auto& b) {
    auto rank = [](const MetricKey& k) {
      return std::tuple(k.scope, k.run_id, static_cast<int>(k.kind),
                        static_cast<int>(k.op),
                        k.error_class ? static_cast<int>(*k.error_class) + 1 : 0);
    };
    return rank(a.first) < rank(b.first);
  });
}

std::vector<GroupRow> MetricsSnapshot::group(const GroupBy& by) const {
  struct Agg {
    uint64_t count = 0;
    uint64_t bytes = 0;
    uint64_t hits = 0;
    uint64_t reads = 0;
  };
  std::map<std::tuple<std::string, std::string, std::string, std::string, std::string>, Agg>
      groups;
  for (const auto& [key, cell] : rows_) {
    std::string scope_label;
    if (by.scope_depth) {
      scope_label = Scope::parse(key.scope).truncated(*by.scope_depth).str();
    }
    auto group_key = std::tuple(by.kind ? std::string(to_string(key.kind)) : "",
                                by.op ? std::string(to_string(key.op)) : "",
                                by.error_class && key.error_class
                                    ? std::string(to_string(*key.error_class))
                                    : "",
                                scope_label, by.run_id ? key.run_id : "");
    Agg& agg = groups[group_key];
    agg.count += cell.count;
    agg.bytes += cell.bytes;
    if (is_read_outcome(key.kind)) {
      agg.reads += cell.count;
      if (key.kind == MetricKind::Hit) agg.hits += cell.count;
    }
  }
  std::vector<GroupRow> out;
  out.reserve(groups.size());
  for (const auto& [key, agg] : groups) {
    GroupRow row;
    std::tie(row.kind, row.op, row.error_class, row.scope, row.run_id) = key;
    row.count = agg.count;
    row.bytes = agg.bytes;
    if (agg.reads > 0) {
      row.hit_rate = static_cast<double>(agg.hits) / static_cast<double>(agg.reads);
    }
    out.push_back(std::move(row));
  }
  return out;
}

uint64_t MetricsSnapshot::count_of(MetricKind kind) const {
  uint64_t total = 0;
  for (const auto& [key, cell] : rows_) {
    if (key.kind == kind) total += cell.count;
  }
  return total;
}

uint64_t MetricsSnapshot::bytes_of(MetricKind kind) const {
  uint64_t total = 0;
  for (const auto& [key, cell] : rows_) {
    if (key.kind == kind) total += cell.bytes;
  }
  return total;
}

uint64_t MetricsSnapshot::error_count(MetricOp op, ErrorClass err) const {
  uint64_t total = 0;
  for (const auto& [key, cell] : rows_) {
    if (key.kind == MetricKind::Error && key.op == op && key.error_class == err) {
      total += cell.count;
    }
  }
  return total;
}

std::optional<double> MetricsSnapshot::hit_rate() const {
  uint64_t hits = count_of(MetricKind::Hit);
  uint64_t reads = hits + count_of(MetricKind::MissCached) +
                   count_of(MetricKind::MissBypassed) + count_of(MetricKind::Fallback);
  if (reads == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(reads);
}

uint64_t MetricsSnapshot::bytes_from_remote() const {
  return bytes_of(MetricKind::MissCached) + bytes_of(MetricKind::MissBypassed) +
         bytes_of(MetricKind::Fallback);
}

std::string MetricsSnapshot::to_json(int indent) const {
  nlohmann::json counters = nlohmann::json::array();
  for (const auto& [key, cell] : rows_) {
    nlohmann::json row = {
        {"kind", to_string(key.kind)}, {"op", to_string(key.op)},
        {"scope", key.scope},          {"count", cell.count},
        {"bytes", cell.bytes},
    };
    if (key.error_class) row["error_class"] = to_string(*key.error_class);
    if (!key.run_id.empty()) row["run_id"] = key.run_id;
    counters.push_back(std::move(row));
  }
  nlohmann::json derived = {
      {"bytes_from_remote", bytes_from_remote()},
      {"bytes_from_cache", bytes_of(MetricKind::Hit)},
      {"evictions", count_of(MetricKind::Evict)},
      {"errors", count_of(MetricKind::Error)},
  };
  if (auto rate = hit_rate()) derived["hit_rate_overall"] = *rate;
  nlohmann::json doc = {{"counters", std::move(counters)},
                        {"derived", std::move(derived)}};
  return doc.dump(indent);
}

}  // namespace edgecache
