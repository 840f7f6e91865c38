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
#include <filesystem>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "edgecache/types.hpp"

namespace edgecache {

/// One access in a workload trace. Text form (one per line):
///   timestamp_ms,file_id,offset,length,scope,run_id
/// where scope is "schema.table.partition" (possibly empty for global) and
/// timestamps are non-decreasing within a trace.
struct TraceEntry {
  Timestamp timestamp_ms = 0;
  std::string file;
  uint64_t offset = 0;
  uint64_t length = 0;
  Scope scope;
  std::string run_id;

  std::string to_line() const;
  static TraceEntry from_line(const std::string& line, size_t line_no);
};

std::vector<TraceEntry> load_trace(const std::filesystem::path& path);
void save_trace(const std::filesystem::path& path, const std::vector<TraceEntry>& trace);

/// Read-size mixture reproducing fragmented analytics reads: by default 55%
/// of requests are at most small_max (10 KB) and 92% at most medium_max
/// (1 MB), so sampled p50/p90 stay within those bounds.
struct SizeMixture {
  uint64_t small_max = 10 * 1024;
  uint64_t medium_max = 1 << 20;
  uint64_t large_max = 4 << 20;
  double p_small = 0.55;
  double p_medium = 0.37;
};

struct ZipfWorkloadSpec {
  uint64_t object_count = 1000;
  double zipf_s = 1.0;  // popularity of rank r is proportional to r^-s
  uint64_t request_count = 10000;
  uint64_t seed = 1;
  SizeMixture sizes;
  /// Objects are spread over these scope labels deterministically by rank.
  uint32_t schemas = 1;
  uint32_t tables = 4;
  uint32_t partitions = 8;
  uint64_t object_extent_bytes = 4 << 20;
  DurationMs interarrival_ms = 1;
  uint64_t requests_per_run = 100;

  void validate() const;
  static ZipfWorkloadSpec parse_json(const std::string& json_text);
  static ZipfWorkloadSpec load_file(const std::filesystem::path& path);
};

/// Deterministic under the spec seed; object of rank r is drawn with
/// probability proportional to r^-s.
std::vector<TraceEntry> generate_zipf_trace(const ZipfWorkloadSpec& spec);

/// Backing store whose content is a pure function of (seed, file, version,
/// offset), so replay can verify every byte without any stored corpus.
class SyntheticBackingStore : public BackingStore {
 public:
  explicit SyntheticBackingStore(uint64_t seed = 0) : seed_(seed) {}

  std::vector<std::byte> read(const std::string& file, uint64_t offset,
                              uint64_t length) override;
  std::string file_version(const std::string& file) override;

  void set_version(const std::string& file, const std::string& version);

  /// The content oracle: fills `out` with the bytes of (file, version) at
  /// `offset`.
  static void fill(uint64_t seed, const std::string& file, const std::string& version,
                   uint64_t offset, std::span<std::byte> out);

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  std::mutex mutex_;
  std::unordered_map<std::string, std::string> versions_;
};

enum class FaultKindSpec { Hang, Corrupt, Enospc };

/// One scheduled fault, applied just before the given request index.
/// Corrupt flips a byte of the target page's on-disk file (deferred until
/// the page is cached, when needed); hang makes the next local read of the
/// target sleep param_ms; enospc makes the next param (default 1) page
/// writes fail with DiskFull.
struct FaultEvent {
  uint64_t at_request = 0;
  FaultKindSpec kind = FaultKindSpec::Corrupt;
  std::string file;
  uint64_t page_index = 0;
  int64_t param = 0;
};

struct FaultSchedule {
  std::vector<FaultEvent> events;

  bool empty() const { return events.empty(); }
  static FaultSchedule parse_json(const std::string& json_text);
  static FaultSchedule load_file(const std::filesystem::path& path);
  std::string to_json() const;
};

}  // namespace edgecache
