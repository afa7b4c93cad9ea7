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

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>

namespace qosmw {

/// Time, blocking, and CPU accounting for middleware and task code. The same
/// task code runs against the wall clock or against a simulated cluster.
class Executor {
 public:
  virtual ~Executor() = default;

  virtual double now_ms() const = 0;
  virtual void sleep_for(double ms) = 0;

  /// Blocks until `ready()` holds or `timeout_ms` elapses (negative waits
  /// forever). `ready` is re-evaluated after every notify_all(). Returns the
  /// final value of `ready()`.
  virtual bool wait_until(const std::function<bool()>& ready, double timeout_ms) = 0;
  virtual void notify_all() = 0;

  /// Work of `mcycles` million CPU cycles done by a task on `machine_rank`.
  /// Simulated executors advance virtual time; real ones return at once
  /// because the caller performs the work itself.
  virtual void consume_cpu(int machine_rank, double mcycles) = 0;

  /// Middleware bookkeeping that occupies the machine's CPU for `ms`.
  virtual void busy_cpu(int machine_rank, double ms) = 0;

  /// Process identifier of the calling task.
  virtual std::int64_t self_pid() = 0;
};

class RealExecutor final : public Executor {
 public:
  RealExecutor();

  double now_ms() const override;
  void sleep_for(double ms) override;
  bool wait_until(const std::function<bool()>& ready, double timeout_ms) override;
  void notify_all() override;
  void consume_cpu(int, double) override {}
  void busy_cpu(int, double) override {}
  std::int64_t self_pid() override;

 private:
  std::chrono::steady_clock::time_point origin_;
  std::mutex mu_;
  std::condition_variable cv_;
};

}  // namespace qosmw
