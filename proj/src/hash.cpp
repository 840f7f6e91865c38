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

#include "edgecache/hash.hpp"

#include <cstdio>

namespace edgecache {

std::string make_file_id(std::string_view file_name, std::string_view version) {
  std::string key(file_name);
  key.push_back('\0');
  key.append(version);
  uint64_t lo = stable_hash64(key);
  uint64_t hi = stable_hash64(key, 0x5bd1e9955bd1e995ULL);
  char buf[33];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx",
                static_cast<unsigned long long>(hi),
                static_cast<unsigned long long>(lo));
  return std::string(buf, 32);
}

}  // namespace edgecache
