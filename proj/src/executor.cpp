// Copyright 2026 The qosmw Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qosmw/executor.hpp"

#include <sys/syscall.h>
#include <unistd.h>

#include <thread>

namespace qosmw {

RealExecutor::RealExecutor() : origin_(std::chrono::steady_clock::now()) {}

double RealExecutor::now_ms() const {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - origin_).count();
}

void RealExecutor::sleep_for(double ms) {
  if (ms > 0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

bool RealExecutor::wait_until(const std::function<bool()>& ready, double timeout_ms) {
  std::unique_lock lk(mu_);
  if (timeout_ms < 0) {
    cv_.wait(lk, ready);
    return true;
  }
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double, std::milli>(timeout_ms));
  return cv_.wait_until(lk, deadline, ready);
}

void RealExecutor::notify_all() {
  // Taking the lock orders the notification after any in-progress predicate
  // check, so a waiter cannot miss it.
  { std::lock_guard lk(mu_); }
  cv_.notify_all();
}

std::int64_t RealExecutor::self_pid() { return static_cast<std::int64_t>(::syscall(SYS_gettid)); }

}  // namespace qosmw
