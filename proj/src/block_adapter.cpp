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

#include "edgecache/block_adapter.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>

#include "edgecache/checksum.hpp"
#include "edgecache/hash.hpp"

namespace fs = std::filesystem;

namespace edgecache {

namespace {

constexpr uint32_t kMetaMagic = 0x314D4B42;  // "BKM1"
constexpr char kMetaLeaf[] = "meta";
constexpr char kStagingMark[] = ".staging-";

void put_u32(std::vector<std::byte>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::vector<std::byte>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
}

uint32_t get_u32(std::span<const std::byte> in, size_t at) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(in[at + i]) << (8 * i);
  return v;
}

uint64_t get_u64(std::span<const std::byte> in, size_t at) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(in[at + i]) << (8 * i);
  return v;
}

struct ParsedMeta {
  uint32_t chunk_bytes = 0;
  uint64_t block_length = 0;
  std::vector<uint32_t> crcs;
};

std::optional<ParsedMeta> parse_block_meta(std::span<const std::byte> meta) {
  if (meta.size() < 16) return std::nullopt;
  if (get_u32(meta, 0) != kMetaMagic) return std::nullopt;
  ParsedMeta parsed;
  parsed.chunk_bytes = get_u32(meta, 4);
  parsed.block_length = get_u64(meta, 8);
  if (parsed.chunk_bytes == 0) return std::nullopt;
  const uint64_t chunks =
      (parsed.block_length + parsed.chunk_bytes - 1) / parsed.chunk_bytes;
  if (meta.size() != 16 + chunks * 4) return std::nullopt;
  parsed.crcs.reserve(chunks);
  for (uint64_t i = 0; i < chunks; ++i) {
    parsed.crcs.push_back(get_u32(meta, 16 + i * 4));
  }
  return parsed;
}

void write_file(const fs::path& path, std::span<const std::byte> data) {
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
  if (fd < 0) {
    int err = errno;
    throw CacheError(err == ENOSPC ? ErrorKind::DiskFull : ErrorKind::IoError,
                     "open " + path.string() + ": " + std::strerror(err));
  }
  size_t done = 0;
  while (done < data.size()) {
    ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      int err = errno;
      ::close(fd);
      throw CacheError(err == ENOSPC ? ErrorKind::DiskFull : ErrorKind::IoError,
                       "write " + path.string() + ": " + std::strerror(err));
    }
    done += static_cast<size_t>(n);
  }
  ::close(fd);
}

std::optional<std::vector<std::byte>> read_whole_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  std::vector<std::byte> out(raw.size());
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

}  // namespace

std::vector<std::byte> make_block_meta(std::span<const std::byte> block,
                                       uint32_t chunk_bytes) {
  std::vector<std::byte> out;
  auto crcs = chunk_checksums(block, chunk_bytes);
  out.reserve(16 + crcs.size() * 4);
  put_u32(out, kMetaMagic);
  put_u32(out, chunk_bytes);
  put_u64(out, block.size());
  for (uint32_t crc : crcs) put_u32(out, crc);
  return out;
}

std::string BlockCacheAdapter::cache_id_for(const BlockKey& key) {
  return make_file_id(key.block_id, "gs" + std::to_string(key.generation_stamp));
}

BlockCacheAdapter::BlockCacheAdapter(Options options) : options_(std::move(options)) {
  if (options_.page_size == 0 || options_.bucket_count == 0) {
    throw CacheError(ErrorKind::ParseError, "page_size and bucket_count must be positive");
  }
  lru_ = make_lru_policy();
  on_restart();
}

fs::path BlockCacheAdapter::entry_dir(const std::string& cache_id) const {
  const uint64_t bucket = stable_hash64(cache_id) % options_.bucket_count;
  return options_.root / ("page_size=" + std::to_string(options_.page_size)) /
         ("bucket_" + std::to_string(bucket)) / cache_id;
}

void BlockCacheAdapter::cache_block(const BlockKey& key,
                                    std::span<const std::byte> block_bytes,
                                    std::span<const std::byte> meta_bytes) {
  if (block_bytes.empty() || meta_bytes.empty()) {
    throw CacheError(ErrorKind::InvalidRange, "block and meta payloads must be non-empty");
  }
  const std::string cache_id = cache_id_for(key);
  const fs::path final_dir = entry_dir(cache_id);
  const uint64_t entry_bytes = block_bytes.size() + meta_bytes.size();

  {
    std::lock_guard lock(mutex_);
    evict_for_capacity_locked(entry_bytes);
  }

  fs::path staging;
  {
    std::lock_guard lock(mutex_);
    staging = final_dir;
    staging += kStagingMark + std::to_string(staging_counter_++);
  }

  try {
    fs::create_directories(staging);
    for (uint64_t page = 0, off = 0; off < block_bytes.size(); ++page) {
      const uint64_t len = std::min<uint64_t>(options_.page_size, block_bytes.size() - off);
      write_file(staging / std::to_string(page), block_bytes.subspan(off, len));
      off += len;
    }
    write_file(staging / kMetaLeaf, meta_bytes);
  } catch (const CacheError& e) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    if (e.kind() == ErrorKind::DiskFull) throw;
    throw CacheError(ErrorKind::PartialWriteRolledBack,
                     std::string("block staging failed, rolled back: ") + e.what());
  }

  // Single rename makes the whole (block, meta) pair visible at once.
  {
    std::lock_guard lock(mutex_);
    std::error_code ec;
    if (fs::exists(final_dir)) {
      remove_entry_locked(key.block_id, key.generation_stamp);
      fs::remove_all(final_dir, ec);
    }
    std::error_code rename_ec;
    fs::rename(staging, final_dir, rename_ec);
    if (rename_ec) {
      fs::remove_all(staging, ec);
      throw CacheError(ErrorKind::PartialWriteRolledBack,
                       "rename into place failed: " + rename_ec.message());
    }
    chains_[key.block_id][key.generation_stamp] =
        Entry{cache_id, block_bytes.size(), entry_bytes};
    key_by_cache_id_[cache_id] = key;
    used_bytes_ += entry_bytes;
    lru_->on_insert(PageId{cache_id, 0});

    if (options_.purge_superseded) {
      auto& chain = chains_[key.block_id];
      std::vector<uint64_t> older;
      for (const auto& [stamp, entry] : chain) {
        if (stamp < key.generation_stamp) older.push_back(stamp);
      }
      for (uint64_t stamp : older) remove_entry_locked(key.block_id, stamp);
    }
  }
}

std::optional<std::vector<std::byte>> BlockCacheAdapter::read_block(const BlockKey& key,
                                                                    uint64_t offset,
                                                                    uint64_t length) {
  const std::string cache_id = cache_id_for(key);
  uint64_t block_length = 0;
  {
    std::lock_guard lock(mutex_);
    auto chain = chains_.find(key.block_id);
    if (chain == chains_.end()) return std::nullopt;
    auto entry = chain->second.find(key.generation_stamp);
    if (entry == chain->second.end()) return std::nullopt;
    block_length = entry->second.block_length;
    lru_->on_access(PageId{cache_id, 0});
  }
  if (length == 0 || offset + length > block_length) return std::nullopt;

  auto meta_raw = read_whole_file(entry_dir(cache_id) / kMetaLeaf);
  auto parsed = meta_raw ? parse_block_meta(*meta_raw) : std::nullopt;
  bool ok = parsed.has_value() && parsed->block_length == block_length;

  std::vector<std::byte> out;
  if (ok) {
    out.resize(length);
    // Widen to checksum-chunk boundaries so the covered CRCs can be checked.
    const uint64_t chunk = parsed->chunk_bytes;
    const uint64_t wide_begin = (offset / chunk) * chunk;
    const uint64_t wide_end =
        std::min(block_length, ((offset + length + chunk - 1) / chunk) * chunk);
    std::vector<std::byte> wide(wide_end - wide_begin);

    uint64_t filled = 0;
    const fs::path dir = entry_dir(cache_id);
    for (uint64_t pos = wide_begin; pos < wide_end && ok;) {
      const uint64_t page = pos / options_.page_size;
      const uint64_t in_page = pos % options_.page_size;
      auto page_bytes = read_whole_file(dir / std::to_string(page));
      if (!page_bytes || in_page >= page_bytes->size()) {
        ok = false;
        break;
      }
      const uint64_t take = std::min<uint64_t>(page_bytes->size() - in_page, wide_end - pos);
      std::memcpy(wide.data() + filled, page_bytes->data() + in_page, take);
      pos += take;
      filled += take;
    }
    if (ok && filled != wide.size()) ok = false;
    if (ok) {
      for (uint64_t c = wide_begin / chunk; ok && c * chunk < wide_end; ++c) {
        const uint64_t begin = c * chunk;
        const uint64_t end = std::min(block_length, begin + chunk);
        uint32_t got = crc32c(std::span<const std::byte>(wide).subspan(begin - wide_begin,
                                                                       end - begin));
        if (got != parsed->crcs[c]) ok = false;
      }
    }
    if (ok) {
      std::memcpy(out.data(), wide.data() + (offset - wide_begin), length);
    }
  }

  if (!ok) {
    std::lock_guard lock(mutex_);
    if (remove_entry_locked(key.block_id, key.generation_stamp)) {
      stats_.corrupted_evictions += 1;
    }
    return std::nullopt;
  }
  return out;
}

std::optional<std::vector<std::byte>> BlockCacheAdapter::read_meta(const BlockKey& key) {
  {
    std::lock_guard lock(mutex_);
    auto chain = chains_.find(key.block_id);
    if (chain == chains_.end() ||
        !chain->second.contains(key.generation_stamp)) {
      return std::nullopt;
    }
  }
  return read_whole_file(entry_dir(cache_id_for(key)) / kMetaLeaf);
}

bool BlockCacheAdapter::remove_entry_locked(const std::string& block_id,
                                            uint64_t generation_stamp) {
  auto chain = chains_.find(block_id);
  if (chain == chains_.end()) return false;
  auto entry = chain->second.find(generation_stamp);
  if (entry == chain->second.end()) return false;
  const std::string cache_id = entry->second.cache_id;
  used_bytes_ -= std::min(used_bytes_, entry->second.entry_bytes);
  lru_->on_remove(PageId{cache_id, 0});
  key_by_cache_id_.erase(cache_id);
  chain->second.erase(entry);
  if (chain->second.empty()) chains_.erase(chain);
  std::error_code ec;
  fs::remove_all(entry_dir(cache_id), ec);
  return true;
}

void BlockCacheAdapter::evict_for_capacity_locked(uint64_t incoming) {
  while (used_bytes_ + incoming > options_.capacity_bytes) {
    auto victims = lru_->victims(1);
    if (victims.empty()) break;
    auto key_it = key_by_cache_id_.find(victims.front().file_id);
    if (key_it == key_by_cache_id_.end()) {
      lru_->on_remove(victims.front());
      continue;
    }
    BlockKey victim = key_it->second;
    if (remove_entry_locked(victim.block_id, victim.generation_stamp)) {
      stats_.capacity_evictions += 1;
    }
  }
}

size_t BlockCacheAdapter::delete_block(const std::string& block_id) {
  std::lock_guard lock(mutex_);
  auto chain = chains_.find(block_id);
  if (chain == chains_.end()) return 0;
  size_t pages = 0;
  std::vector<uint64_t> stamps;
  for (const auto& [stamp, entry] : chain->second) stamps.push_back(stamp);
  for (uint64_t stamp : stamps) {
    auto entry = chains_[block_id].at(stamp);
    pages += static_cast<size_t>((entry.block_length + options_.page_size - 1) /
                                 options_.page_size);
    remove_entry_locked(block_id, stamp);
  }
  return pages;
}

void BlockCacheAdapter::on_restart() {
  std::lock_guard lock(mutex_);
  std::error_code ec;
  fs::remove_all(options_.root, ec);
  fs::create_directories(options_.root /
                         ("page_size=" + std::to_string(options_.page_size)));
  chains_.clear();
  key_by_cache_id_.clear();
  lru_ = make_lru_policy();
  used_bytes_ = 0;
}

std::optional<std::pair<std::string, uint64_t>> BlockCacheAdapter::mapping(
    const std::string& block_id) const {
  std::lock_guard lock(mutex_);
  auto chain = chains_.find(block_id);
  if (chain == chains_.end() || chain->second.empty()) return std::nullopt;
  const auto& [stamp, entry] = *chain->second.rbegin();
  return std::make_pair(entry.cache_id, entry.block_length);
}

std::vector<std::string> BlockCacheAdapter::scan_incomplete_entries() const {
  std::vector<std::string> violations;
  const fs::path size_dir =
      options_.root / ("page_size=" + std::to_string(options_.page_size));
  std::error_code ec;
  for (auto bucket = fs::directory_iterator(size_dir, ec);
       bucket != fs::directory_iterator(); ++bucket) {
    if (!bucket->is_directory()) continue;
    for (const auto& entry : fs::directory_iterator(bucket->path())) {
      const std::string name = entry.path().filename().string();
      if (name.find(kStagingMark) != std::string::npos) continue;  // invisible
      auto meta_raw = read_whole_file(entry.path() / kMetaLeaf);
      auto parsed = meta_raw ? parse_block_meta(*meta_raw) : std::nullopt;
      if (!parsed) {
        violations.push_back(entry.path().string() + ": missing or bad meta");
        continue;
      }
      uint64_t total = 0;
      for (const auto& page : fs::directory_iterator(entry.path())) {
        if (page.path().filename() == kMetaLeaf) continue;
        total += page.file_size();
      }
      if (total != parsed->block_length) {
        violations.push_back(entry.path().string() + ": page bytes " +
                             std::to_string(total) + " != meta length " +
                             std::to_string(parsed->block_length));
      }
    }
  }
  return violations;
}

uint64_t BlockCacheAdapter::used_bytes() const {
  std::lock_guard lock(mutex_);
  return used_bytes_;
}

uint64_t BlockCacheAdapter::cached_payload_bytes_on_disk() const {
  uint64_t total = 0;
  std::error_code ec;
  for (auto it = fs::recursive_directory_iterator(options_.root, ec);
       it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) break;
    if (it->is_regular_file(ec)) total += it->file_size(ec);
  }
  return total;
}

BlockCacheAdapter::Stats BlockCacheAdapter::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

}  // namespace edgecache
