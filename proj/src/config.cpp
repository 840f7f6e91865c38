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

#include "edgecache/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace edgecache {

namespace {

using nlohmann::json;

uint64_t require_positive(const json& value, const std::string& key) {
  if (!value.is_number_unsigned() || value.get<uint64_t>() == 0) {
    throw CacheError(ErrorKind::ParseError, "'" + key + "' must be a positive integer");
  }
  return value.get<uint64_t>();
}

}  // namespace

void CacheConfig::validate() const {
  if (dirs.empty()) {
    throw CacheError(ErrorKind::ParseError, "config needs at least one cache dir");
  }
  for (const auto& dir : dirs) {
    if (dir.capacity_bytes == 0) {
      throw CacheError(ErrorKind::ParseError,
                       "dir '" + dir.path.string() + "' needs a positive capacity");
    }
  }
  if (page_size_bytes == 0 || bucket_count == 0) {
    throw CacheError(ErrorKind::ParseError, "page size and bucket count must be positive");
  }
  if (read_timeout_ms <= 0 || remote_timeout_ms <= 0) {
    throw CacheError(ErrorKind::ParseError, "timeouts must be positive");
  }
  if (enospc_evict_percent == 0 || enospc_evict_percent > 100) {
    throw CacheError(ErrorKind::ParseError, "enospc_evict_percent must be in [1, 100]");
  }
}

CacheConfig CacheConfig::parse_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw CacheError(ErrorKind::ParseError, std::string("cache config: ") + e.what());
  }
  if (!doc.is_object()) {
    throw CacheError(ErrorKind::ParseError, "cache config must be a JSON object");
  }

  static const char* kKnown[] = {
      "page_size_bytes", "dirs",          "eviction_policy",
      "read_timeout_ms", "remote_timeout_ms", "default_ttl_s",
      "ttl_sweep_period_s", "quotas",     "databases",
      "rate_limit",      "bucket_count",  "checksum_pages",
      "enospc_evict_percent", "seed",
  };
  for (const auto& [key, value] : doc.items()) {
    bool known = false;
    for (const char* k : kKnown) {
      if (key == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw CacheError(ErrorKind::ParseError, "unknown key '" + key + "' in cache config");
    }
  }

  CacheConfig cfg;
  if (doc.contains("page_size_bytes")) {
    cfg.page_size_bytes = require_positive(doc["page_size_bytes"], "page_size_bytes");
  }
  if (doc.contains("dirs")) {
    if (!doc["dirs"].is_array()) {
      throw CacheError(ErrorKind::ParseError, "'dirs' must be an array");
    }
    for (const auto& entry : doc["dirs"]) {
      if (!entry.is_object() || !entry.contains("path") || !entry["path"].is_string() ||
          !entry.contains("capacity_bytes")) {
        throw CacheError(ErrorKind::ParseError,
                         "each dir needs {path, capacity_bytes}");
      }
      for (const auto& [key, value] : entry.items()) {
        if (key != "path" && key != "capacity_bytes") {
          throw CacheError(ErrorKind::ParseError, "unknown key '" + key + "' in dir entry");
        }
      }
      cfg.dirs.push_back(DirConfig{entry["path"].get<std::string>(),
                                   require_positive(entry["capacity_bytes"],
                                                    "capacity_bytes")});
    }
  }
  if (doc.contains("eviction_policy")) {
    if (!doc["eviction_policy"].is_string()) {
      throw CacheError(ErrorKind::ParseError, "'eviction_policy' must be a string");
    }
    cfg.eviction_policy = policy_kind_from_string(doc["eviction_policy"].get<std::string>());
  }
  if (doc.contains("read_timeout_ms")) {
    cfg.read_timeout_ms =
        static_cast<DurationMs>(require_positive(doc["read_timeout_ms"], "read_timeout_ms"));
  }
  if (doc.contains("remote_timeout_ms")) {
    cfg.remote_timeout_ms = static_cast<DurationMs>(
        require_positive(doc["remote_timeout_ms"], "remote_timeout_ms"));
  }
  if (doc.contains("default_ttl_s")) {
    cfg.default_ttl_ms = static_cast<DurationMs>(
                             require_positive(doc["default_ttl_s"], "default_ttl_s")) *
                         1000;
  }
  if (doc.contains("ttl_sweep_period_s")) {
    cfg.ttl_sweep_period_ms = static_cast<DurationMs>(require_positive(
                                  doc["ttl_sweep_period_s"], "ttl_sweep_period_s")) *
                              1000;
  }
  if (doc.contains("quotas")) {
    if (!doc["quotas"].is_array()) {
      throw CacheError(ErrorKind::ParseError, "'quotas' must be an array");
    }
    for (const auto& entry : doc["quotas"]) {
      if (!entry.is_object() || !entry.contains("scope") || !entry["scope"].is_string() ||
          !entry.contains("capacity_bytes")) {
        throw CacheError(ErrorKind::ParseError,
                         "each quota needs {scope, capacity_bytes}");
      }
      for (const auto& [key, value] : entry.items()) {
        if (key != "scope" && key != "capacity_bytes") {
          throw CacheError(ErrorKind::ParseError,
                           "unknown key '" + key + "' in quota entry");
        }
      }
      cfg.quotas.push_back(QuotaRule{Scope::parse(entry["scope"].get<std::string>()),
                                     require_positive(entry["capacity_bytes"],
                                                      "capacity_bytes")});
    }
  }
  if (doc.contains("databases")) {
    json rules = {{"databases", doc["databases"]}};
    cfg.admission_rules = AdmissionRuleSet::parse_json(rules.dump());
  }
  if (doc.contains("rate_limit")) {
    const auto& rl = doc["rate_limit"];
    if (!rl.is_object()) {
      throw CacheError(ErrorKind::ParseError, "'rate_limit' must be an object");
    }
    for (const auto& [key, value] : rl.items()) {
      if (key != "window_minutes" && key != "threshold") {
        throw CacheError(ErrorKind::ParseError, "unknown key '" + key + "' in rate_limit");
      }
    }
    RateLimitConfig rate;
    if (rl.contains("window_minutes")) {
      rate.window_minutes =
          static_cast<uint32_t>(require_positive(rl["window_minutes"], "window_minutes"));
    }
    if (rl.contains("threshold")) {
      if (!rl["threshold"].is_number_unsigned()) {
        throw CacheError(ErrorKind::ParseError, "'threshold' must be a non-negative integer");
      }
      rate.threshold = rl["threshold"].get<uint64_t>();
    }
    cfg.rate_limit = rate;
  }
  if (doc.contains("bucket_count")) {
    cfg.bucket_count =
        static_cast<uint32_t>(require_positive(doc["bucket_count"], "bucket_count"));
  }
  if (doc.contains("checksum_pages")) {
    if (!doc["checksum_pages"].is_boolean()) {
      throw CacheError(ErrorKind::ParseError, "'checksum_pages' must be a boolean");
    }
    cfg.checksum_pages = doc["checksum_pages"].get<bool>();
  }
  if (doc.contains("enospc_evict_percent")) {
    cfg.enospc_evict_percent = static_cast<uint32_t>(
        require_positive(doc["enospc_evict_percent"], "enospc_evict_percent"));
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) {
      throw CacheError(ErrorKind::ParseError, "'seed' must be a non-negative integer");
    }
    cfg.seed = doc["seed"].get<uint64_t>();
  }
  cfg.validate();
  return cfg;
}

CacheConfig CacheConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw CacheError(ErrorKind::IoError, "cannot open config file " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_json(buffer.str());
}

}  // namespace edgecache
