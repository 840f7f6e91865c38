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

#include "edgecache/types.hpp"

#include <chrono>

#include "edgecache/hash.hpp"

namespace edgecache {

Timestamp system_now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::DiskFull: return "DiskFull";
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::Timeout: return "Timeout";
    case ErrorKind::Corrupted: return "Corrupted";
    case ErrorKind::PageSizeMismatch: return "PageSizeMismatch";
    case ErrorKind::DuplicatePage: return "DuplicatePage";
    case ErrorKind::InvalidRange: return "InvalidRange";
    case ErrorKind::NoSpace: return "NoSpace";
    case ErrorKind::ImpossibleFit: return "ImpossibleFit";
    case ErrorKind::BackingUnavailable: return "BackingUnavailable";
    case ErrorKind::RingEmpty: return "RingEmpty";
    case ErrorKind::UnknownNode: return "UnknownNode";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::PartialWriteRolledBack: return "PartialWriteRolledBack";
  }
  return "Unknown";
}

size_t PageIdHash::operator()(const PageId& id) const {
  return static_cast<size_t>(stable_hash64(id.file_id, id.page_index));
}

Scope::Scope(std::vector<std::string> path) : path_(std::move(path)) {
  if (path_.size() > kMaxScopeDepth) {
    throw CacheError(ErrorKind::ParseError, "scope deeper than " +
                                                std::to_string(kMaxScopeDepth) +
                                                " levels");
  }
  for (const auto& label : path_) {
    if (label.empty() || label.find('.') != std::string::npos ||
        label.find(',') != std::string::npos) {
      throw CacheError(ErrorKind::ParseError, "invalid scope label: '" + label + "'");
    }
  }
}

Scope Scope::of(std::initializer_list<std::string> labels) {
  return Scope(std::vector<std::string>(labels));
}

Scope Scope::parse(std::string_view text) {
  if (text.empty()) return Scope();
  std::vector<std::string> labels;
  size_t start = 0;
  while (true) {
    size_t dot = text.find('.', start);
    if (dot == std::string_view::npos) {
      labels.emplace_back(text.substr(start));
      break;
    }
    labels.emplace_back(text.substr(start, dot - start));
    start = dot + 1;
  }
  return Scope(std::move(labels));
}

bool Scope::contains(const Scope& other) const {
  if (path_.size() > other.path_.size()) return false;
  for (size_t i = 0; i < path_.size(); ++i) {
    if (path_[i] != other.path_[i]) return false;
  }
  return true;
}

Scope Scope::parent() const {
  if (path_.empty()) return Scope();
  return Scope(std::vector<std::string>(path_.begin(), path_.end() - 1));
}

Scope Scope::truncated(size_t depth) const {
  if (depth >= path_.size()) return *this;
  return Scope(std::vector<std::string>(path_.begin(), path_.begin() + depth));
}

std::string Scope::str() const {
  std::string out;
  for (size_t i = 0; i < path_.size(); ++i) {
    if (i > 0) out += '.';
    out += path_[i];
  }
  return out;
}

}  // namespace edgecache
