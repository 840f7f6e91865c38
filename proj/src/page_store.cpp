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

#include "edgecache/page_store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <system_error>

#include "edgecache/checksum.hpp"
#include "edgecache/hash.hpp"

namespace fs = std::filesystem;

namespace edgecache {

namespace {

constexpr char kPageSizePrefix[] = "page_size=";
constexpr char kBucketPrefix[] = "bucket_";
constexpr char kTempPrefix[] = ".tmp-";
constexpr char kCrcSuffix[] = ".crc";

bool is_hex_id(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

bool parse_u64(std::string_view s, uint64_t* out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), *out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

[[noreturn]] void throw_errno(ErrorKind fallback, const std::string& what) {
  int err = errno;
  if (err == ENOSPC || err == EDQUOT) {
    throw CacheError(ErrorKind::DiskFull, what + ": no space left on device");
  }
  if (err == ENOENT) {
    throw CacheError(ErrorKind::NotFound, what + ": " + std::strerror(err));
  }
  throw CacheError(fallback, what + ": " + std::strerror(err));
}

Timestamp file_mtime_ms(const fs::path& path) {
  struct ::stat st {};
  if (::stat(path.c_str(), &st) != 0) return 0;
  return static_cast<Timestamp>(st.st_mtim.tv_sec) * 1000 +
         st.st_mtim.tv_nsec / 1000000;
}

class Fd {
 public:
  explicit Fd(int fd) : fd_(fd) {}
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  int get() const { return fd_; }

 private:
  int fd_;
};

void pread_fully(int fd, std::byte* buf, size_t len, uint64_t offset,
                 const std::string& what) {
  size_t done = 0;
  while (done < len) {
    ssize_t n = ::pread(fd, buf + done, len - done, offset + done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno(ErrorKind::IoError, what);
    }
    if (n == 0) {
      throw CacheError(ErrorKind::Corrupted, what + ": unexpected end of file");
    }
    done += static_cast<size_t>(n);
  }
}

}  // namespace

PageStore::PageStore(Options options) : options_(std::move(options)) {
  if (options_.dirs.empty()) {
    throw CacheError(ErrorKind::ParseError, "page store needs at least one directory");
  }
  if (options_.page_size == 0 || options_.bucket_count == 0) {
    throw CacheError(ErrorKind::ParseError, "page_size and bucket_count must be positive");
  }
  const std::string size_folder = kPageSizePrefix + std::to_string(options_.page_size);
  for (const auto& dir : options_.dirs) {
    fs::create_directories(dir);
    // A root holding a store with some other page size must be discarded by
    // the operator, never silently re-chunked.
    for (const auto& entry : fs::directory_iterator(dir)) {
      std::string name = entry.path().filename().string();
      if (name.starts_with(kPageSizePrefix) && name != size_folder) {
        throw CacheError(ErrorKind::PageSizeMismatch,
                         "cache root " + dir.string() + " already holds " + name +
                             ", configured " + size_folder);
      }
    }
    fs::create_directories(dir / size_folder);
    layouts_.push_back(StoreLayout{dir, options_.page_size, options_.bucket_count});
  }
}

fs::path PageStore::path_for(const StoreLayout& layout, const PageId& id) {
  uint64_t bucket = stable_hash64(id.file_id) % layout.bucket_count;
  return layout.root / (kPageSizePrefix + std::to_string(layout.page_size)) /
         (kBucketPrefix + std::to_string(bucket)) / id.file_id /
         std::to_string(id.page_index);
}

fs::path PageStore::page_path(const PageId& id, uint32_t dir) const {
  if (dir >= layouts_.size()) {
    throw CacheError(ErrorKind::IoError, "directory index out of range");
  }
  return path_for(layouts_[dir], id);
}

void PageStore::write_file_atomic(const fs::path& final_path,
                                  std::span<const std::byte> data) const {
  const fs::path parent = final_path.parent_path();
  const std::string temp_name =
      kTempPrefix + final_path.filename().string() + "-" +
      std::to_string(::getpid()) + "-" +
      std::to_string(temp_counter_.fetch_add(1, std::memory_order_relaxed));
  const fs::path temp_path = parent / temp_name;

  // delete_page may concurrently prune an emptied file directory; recreate
  // and retry once.
  int fd = -1;
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::error_code ec;
    fs::create_directories(parent, ec);
    fd = ::open(temp_path.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
    if (fd >= 0 || errno != ENOENT) break;
  }
  if (fd < 0) {
    throw_errno(ErrorKind::IoError, "open " + temp_path.string());
  }
  {
    Fd guard(fd);
    size_t done = 0;
    while (done < data.size()) {
      ssize_t n = ::write(fd, data.data() + done, data.size() - done);
      if (n < 0) {
        if (errno == EINTR) continue;
        int saved = errno;
        ::unlink(temp_path.c_str());
        errno = saved;
        throw_errno(ErrorKind::IoError, "write " + temp_path.string());
      }
      done += static_cast<size_t>(n);
    }
  }
  if (::rename(temp_path.c_str(), final_path.c_str()) != 0) {
    int saved = errno;
    ::unlink(temp_path.c_str());
    errno = saved;
    throw_errno(ErrorKind::IoError, "rename " + final_path.string());
  }
}

PageRecord PageStore::write_page(const PageId& id, std::span<const std::byte> data,
                                 uint32_t dir) {
  if (!is_hex_id(id.file_id)) {
    throw CacheError(ErrorKind::ParseError,
                     "file id must be lowercase hex: '" + id.file_id + "'");
  }
  if (data.empty() || data.size() > options_.page_size) {
    throw CacheError(ErrorKind::InvalidRange,
                     "page data size " + std::to_string(data.size()) +
                         " outside (0, " + std::to_string(options_.page_size) + "]");
  }
  if (hooks_.before_write) hooks_.before_write(id);

  const fs::path final_path = page_path(id, dir);
  if (options_.checksums) {
    auto crcs = chunk_checksums(data);
    std::vector<std::byte> raw(crcs.size() * 4);
    for (size_t i = 0; i < crcs.size(); ++i) {
      uint32_t v = crcs[i];
      raw[i * 4 + 0] = static_cast<std::byte>(v & 0xFF);
      raw[i * 4 + 1] = static_cast<std::byte>((v >> 8) & 0xFF);
      raw[i * 4 + 2] = static_cast<std::byte>((v >> 16) & 0xFF);
      raw[i * 4 + 3] = static_cast<std::byte>((v >> 24) & 0xFF);
    }
    // Sidecar lands first so a visible page always has its checksums.
    fs::path crc_path = final_path;
    crc_path += kCrcSuffix;
    write_file_atomic(crc_path, raw);
  }
  write_file_atomic(final_path, data);
  return PageRecord{id, data.size(), dir};
}

void PageStore::read_page(const PageId& id, uint32_t dir, uint64_t offset,
                          std::span<std::byte> out, uint64_t expected_length) const {
  if (hooks_.before_read) hooks_.before_read(id);

  const fs::path path = page_path(id, dir);
  int raw_fd = ::open(path.c_str(), O_RDONLY);
  if (raw_fd < 0) {
    throw_errno(ErrorKind::IoError, "open " + path.string());
  }
  Fd fd(raw_fd);

  struct ::stat st {};
  if (::fstat(fd.get(), &st) != 0) {
    throw_errno(ErrorKind::IoError, "stat " + path.string());
  }
  const uint64_t actual = static_cast<uint64_t>(st.st_size);
  if (expected_length > 0 && actual != expected_length) {
    throw CacheError(ErrorKind::Corrupted,
                     "page " + path.string() + " is " + std::to_string(actual) +
                         " bytes, expected " + std::to_string(expected_length));
  }
  if (offset + out.size() > actual) {
    throw CacheError(ErrorKind::InvalidRange,
                     "read past end of page " + path.string());
  }
  if (out.empty()) return;

  if (!options_.checksums) {
    pread_fully(fd.get(), out.data(), out.size(), offset, "read " + path.string());
    return;
  }

  // Verified read: widen to chunk boundaries, check the covered CRCs, then
  // hand back the requested slice.
  const uint64_t first_chunk = offset / kChecksumChunkBytes;
  const uint64_t last_chunk = (offset + out.size() - 1) / kChecksumChunkBytes;
  const uint64_t wide_begin = first_chunk * kChecksumChunkBytes;
  const uint64_t wide_end =
      std::min<uint64_t>(actual, (last_chunk + 1) * kChecksumChunkBytes);
  std::vector<std::byte> wide(wide_end - wide_begin);
  pread_fully(fd.get(), wide.data(), wide.size(), wide_begin, "read " + path.string());

  fs::path crc_path = path;
  crc_path += kCrcSuffix;
  int crc_raw = ::open(crc_path.c_str(), O_RDONLY);
  if (crc_raw < 0) {
    throw CacheError(ErrorKind::Corrupted, "missing checksum sidecar for " + path.string());
  }
  Fd crc_fd(crc_raw);
  const uint64_t total_chunks = (actual + kChecksumChunkBytes - 1) / kChecksumChunkBytes;
  struct ::stat crc_st {};
  if (::fstat(crc_fd.get(), &crc_st) != 0 ||
      static_cast<uint64_t>(crc_st.st_size) != total_chunks * 4) {
    throw CacheError(ErrorKind::Corrupted, "bad checksum sidecar for " + path.string());
  }
  std::vector<std::byte> crc_raw_bytes((last_chunk - first_chunk + 1) * 4);
  pread_fully(crc_fd.get(), crc_raw_bytes.data(), crc_raw_bytes.size(), first_chunk * 4,
              "read " + crc_path.string());

  for (uint64_t chunk = first_chunk; chunk <= last_chunk; ++chunk) {
    const uint64_t begin = chunk * kChecksumChunkBytes;
    const uint64_t end = std::min<uint64_t>(actual, begin + kChecksumChunkBytes);
    uint32_t want = 0;
    const size_t base = (chunk - first_chunk) * 4;
    want |= static_cast<uint32_t>(crc_raw_bytes[base + 0]);
    want |= static_cast<uint32_t>(crc_raw_bytes[base + 1]) << 8;
    want |= static_cast<uint32_t>(crc_raw_bytes[base + 2]) << 16;
    want |= static_cast<uint32_t>(crc_raw_bytes[base + 3]) << 24;
    uint32_t got = crc32c(std::span<const std::byte>(wide).subspan(
        begin - wide_begin, end - begin));
    if (got != want) {
      throw CacheError(ErrorKind::Corrupted,
                       "checksum mismatch in chunk " + std::to_string(chunk) + " of " +
                           path.string());
    }
  }
  std::memcpy(out.data(), wide.data() + (offset - wide_begin), out.size());
}

bool PageStore::delete_page(const PageId& id, uint32_t dir) {
  const fs::path path = page_path(id, dir);
  bool removed = ::unlink(path.c_str()) == 0;
  if (!removed && errno != ENOENT) {
    throw_errno(ErrorKind::IoError, "unlink " + path.string());
  }
  fs::path crc_path = path;
  crc_path += kCrcSuffix;
  ::unlink(crc_path.c_str());
  // Prune the file directory once its last page is gone; harmless if a
  // concurrent writer keeps it non-empty.
  std::error_code ec;
  fs::remove(path.parent_path(), ec);
  return removed;
}

RestoreResult PageStore::restore() const {
  RestoreResult result;
  const std::string size_folder = kPageSizePrefix + std::to_string(options_.page_size);
  for (uint32_t dir = 0; dir < layouts_.size(); ++dir) {
    const fs::path root = layouts_[dir].root;
    for (const auto& top : fs::directory_iterator(root)) {
      const std::string top_name = top.path().filename().string();
      if (top_name != size_folder) {
        if (top_name.starts_with(kPageSizePrefix)) {
          throw CacheError(ErrorKind::PageSizeMismatch,
                           "store at " + root.string() + " has " + top_name +
                               ", configured " + size_folder);
        }
        result.skipped.push_back(top.path().string());
        continue;
      }
      for (const auto& bucket_entry : fs::directory_iterator(top.path())) {
        const std::string bucket_name = bucket_entry.path().filename().string();
        uint64_t bucket = 0;
        if (!bucket_entry.is_directory() || !bucket_name.starts_with(kBucketPrefix) ||
            !parse_u64(bucket_name.substr(sizeof(kBucketPrefix) - 1), &bucket) ||
            bucket >= options_.bucket_count) {
          result.skipped.push_back(bucket_entry.path().string());
          continue;
        }
        for (const auto& file_entry : fs::directory_iterator(bucket_entry.path())) {
          const std::string file_id = file_entry.path().filename().string();
          // A file directory in the wrong bucket is unreachable through
          // path_for, so it does not restore.
          if (!file_entry.is_directory() || !is_hex_id(file_id) ||
              stable_hash64(file_id) % options_.bucket_count != bucket) {
            result.skipped.push_back(file_entry.path().string());
            continue;
          }
          for (const auto& page_entry : fs::directory_iterator(file_entry.path())) {
            const std::string leaf = page_entry.path().filename().string();
            if (leaf.ends_with(kCrcSuffix)) continue;
            uint64_t index = 0;
            uint64_t size = 0;
            if (page_entry.is_regular_file()) size = page_entry.file_size();
            if (!page_entry.is_regular_file() || !parse_u64(leaf, &index) ||
                size == 0 || size > options_.page_size) {
              result.skipped.push_back(page_entry.path().string());
              continue;
            }
            result.records.push_back(PageRecord{PageId{file_id, index}, size, dir});
            result.mtimes.push_back(file_mtime_ms(page_entry.path()));
          }
        }
      }
    }
  }
  return result;
}

uint64_t PageStore::disk_usage(uint32_t dir) const {
  const fs::path root = layouts_.at(dir).root;
  uint64_t total = 0;
  std::error_code ec;
  for (auto it = fs::recursive_directory_iterator(root, ec);
       it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) break;
    if (it->is_regular_file(ec)) total += it->file_size(ec);
  }
  return total;
}

}  // namespace edgecache
