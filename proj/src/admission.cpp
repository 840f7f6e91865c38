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

#include "edgecache/admission.hpp"

#include <set>

#include <json.hpp>

namespace edgecache {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* k : allowed) {
      if (key == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw CacheError(ErrorKind::ParseError,
                       "unknown key '" + key + "' in " + where);
    }
  }
}

int64_t minute_of(Timestamp ms) { return ms / 60000; }

}  // namespace

AdmissionRuleSet AdmissionRuleSet::parse_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw CacheError(ErrorKind::ParseError, std::string("admission rules: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("databases") || !doc["databases"].is_array()) {
    throw CacheError(ErrorKind::ParseError,
                     "admission rules must be an object with a 'databases' array");
  }
  reject_unknown_keys(doc, {"databases"}, "admission rules");

  AdmissionRuleSet rules;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& db : doc["databases"]) {
    if (!db.is_object() || !db.contains("name") || !db["name"].is_string() ||
        !db.contains("tables") || !db["tables"].is_array()) {
      throw CacheError(ErrorKind::ParseError,
                       "each database needs a 'name' string and a 'tables' array");
    }
    reject_unknown_keys(db, {"name", "tables"}, "database rule");
    DatabaseRule db_rule;
    db_rule.name = db["name"].get<std::string>();
    for (const auto& table : db["tables"]) {
      if (!table.is_object() || !table.contains("name") || !table["name"].is_string()) {
        throw CacheError(ErrorKind::ParseError, "each table rule needs a 'name' string");
      }
      reject_unknown_keys(table, {"name", "maxCachedPartitions"}, "table rule");
      TableRule table_rule;
      table_rule.name = table["name"].get<std::string>();
      if (table.contains("maxCachedPartitions")) {
        const auto& cap = table["maxCachedPartitions"];
        if (!cap.is_number_unsigned() || cap.get<uint64_t>() == 0) {
          throw CacheError(ErrorKind::ParseError,
                           "maxCachedPartitions must be a positive integer");
        }
        table_rule.max_cached_partitions = cap.get<uint32_t>();
      }
      if (!seen.emplace(db_rule.name, table_rule.name).second) {
        throw CacheError(ErrorKind::ParseError,
                         "duplicate rule for " + db_rule.name + "." + table_rule.name);
      }
      db_rule.tables.push_back(std::move(table_rule));
    }
    rules.databases.push_back(std::move(db_rule));
  }
  return rules;
}

const TableRule* AdmissionRuleSet::find(const std::string& db,
                                        const std::string& table) const {
  for (const auto& db_rule : databases) {
    if (db_rule.name != db) continue;
    for (const auto& table_rule : db_rule.tables) {
      if (table_rule.name == table) return &table_rule;
    }
  }
  return nullptr;
}

bool admit_static(const AdmissionRuleSet& rules, const Scope& scope,
                  const CachedPartitionView& view) {
  if (scope.depth() < 2) return false;
  const std::string& db = scope.path()[0];
  const std::string& table = scope.path()[1];
  const TableRule* rule = rules.find(db, table);
  if (!rule) return false;
  if (!rule->max_cached_partitions || scope.depth() < 3) return true;
  if (view.partition_is_cached && view.partition_is_cached(scope)) return true;
  size_t cached = view.partition_count ? view.partition_count(db, table) : 0;
  return cached < *rule->max_cached_partitions;
}

BucketTimeRateLimit::BucketTimeRateLimit(uint32_t window_minutes, uint64_t threshold)
    : window_minutes_(window_minutes), threshold_(threshold) {
  if (window_minutes_ == 0) {
    throw CacheError(ErrorKind::ParseError, "rate limit window must be positive");
  }
}

void BucketTimeRateLimit::record_access(const std::string& block_id, Timestamp now) {
  const int64_t minute = minute_of(now);
  std::lock_guard lock(mutex_);
  if (buckets_.empty() || buckets_.back().first < minute) {
    buckets_.emplace_back(minute, std::unordered_map<std::string, uint64_t>{});
  }
  buckets_.back().second[block_id] += 1;
  const int64_t oldest_live = minute - static_cast<int64_t>(window_minutes_) + 1;
  while (!buckets_.empty() && buckets_.front().first < oldest_live) {
    buckets_.pop_front();
  }
}

bool BucketTimeRateLimit::should_admit(const std::string& block_id, Timestamp now) const {
  const int64_t minute = minute_of(now);
  const int64_t oldest_live = minute - static_cast<int64_t>(window_minutes_) + 1;
  uint64_t total = 0;
  std::lock_guard lock(mutex_);
  for (const auto& [stamp, counts] : buckets_) {
    if (stamp < oldest_live || stamp > minute) continue;
    auto it = counts.find(block_id);
    if (it != counts.end()) total += it->second;
  }
  return total > threshold_;
}

size_t BucketTimeRateLimit::live_buckets() const {
  std::lock_guard lock(mutex_);
  return buckets_.size();
}

}  // namespace edgecache
