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

#include "edgecache/timed_executor.hpp"

namespace edgecache {

TimedExecutor::~TimedExecutor() {
  {
    std::lock_guard lock(mutex_);
    shutdown_ = true;
  }
  cv_.notify_all();
  // Joining waits out any straggler tasks; injected hangs are finite sleeps.
  for (auto& thread : threads_) thread.join();
}

size_t TimedExecutor::thread_count() const {
  std::lock_guard lock(mutex_);
  return threads_.size();
}

void TimedExecutor::enqueue(std::function<void()> wrapped) {
  {
    std::lock_guard lock(mutex_);
    queue_.push_back(std::move(wrapped));
    if (idle_ == 0) {
      threads_.emplace_back([this] { worker_loop(); });
    }
  }
  cv_.notify_one();
}

void TimedExecutor::worker_loop() {
  while (true) {
    std::function<void()> task;
    {
      std::unique_lock lock(mutex_);
      ++idle_;
      cv_.wait(lock, [this] { return shutdown_ || !queue_.empty(); });
      --idle_;
      if (queue_.empty()) return;  // shutdown
      task = std::move(queue_.front());
      queue_.pop_front();
    }
    task();
  }
}

}  // namespace edgecache
