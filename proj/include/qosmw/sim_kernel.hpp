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

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <queue>
#include <condition_variable>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace qosmw::sim {

/// Thrown inside a simulated process that has been killed. Deliberately not a
/// std::exception so ordinary error handlers let it pass.
struct Killed {};

using Pid = std::int64_t;

/// Deterministic discrete-event scheduler over a virtual clock. Every
/// simulated process runs on its own OS thread, but exactly one thread (a
/// process or the kernel) executes at any moment; control is handed over
/// explicitly, so runs are reproducible event for event.
// Binary handoff flag. std::binary_semaphore in libstdc++ 11 can lose
// wakeups under heavy handoff traffic.
class Baton {
 public:
  void release() {
    {
      std::lock_guard<std::mutex> lk(mu_);
      ready_ = true;
    }
    cv_.notify_one();
  }
  void acquire() {
    std::unique_lock<std::mutex> lk(mu_);
    cv_.wait(lk, [this] { return ready_; });
    ready_ = false;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  bool ready_ = false;
};

class Kernel {
 public:
  Kernel() = default;
  ~Kernel();
  Kernel(const Kernel&) = delete;
  Kernel& operator=(const Kernel&) = delete;

  double now_ms() const { return static_cast<double>(now_us_) / 1000.0; }
  std::int64_t now_us() const { return now_us_; }

  /// Creates a process that starts at `start_ms` (now when earlier).
  Pid spawn(std::string name, std::function<void()> body, double start_ms = 0.0);

  /// Runs `fn` in kernel context at `t_ms`. It must not sleep or block.
  void at(double t_ms, std::function<void()> fn);

  // Process-context calls. While a killed process unwinds they return at once.
  void sleep_until(double t_ms);
  void sleep_for(double ms);
  /// Suspends until wake() or the deadline (negative: none). True when woken.
  bool block(double deadline_ms);

  /// Resumes a blocked process at the current time. No effect otherwise.
  void wake(Pid pid);
  /// Terminates a process. Killing the caller throws Killed immediately.
  void kill(Pid pid);
  bool alive(Pid pid) const;
  bool finished(Pid pid) const;
  const std::string& name(Pid pid) const;

  /// Calling process, or -1 in kernel context.
  Pid current() const { return current_; }

  enum class RunResult { stopped, idle, time_limit };
  /// Dispatches events until `stop()` holds after an event, the queue
  /// drains, or the next event lies beyond `limit_ms`.
  RunResult run(const std::function<bool()>& stop = {}, double limit_ms = std::numeric_limits<double>::infinity());

  /// Kills every remaining process and joins all threads.
  void shutdown();

  /// "<process>: <message>" for every process that ended with an exception.
  const std::vector<std::string>& failures() const { return failures_; }
  std::uint64_t events_dispatched() const { return dispatched_; }

 private:
  struct Process {
    Pid pid = 0;
    std::string name;
    std::function<void()> body;
    std::thread thread;
    Baton sem;
    bool started = false;
    bool finished = false;
    bool killed = false;
    bool unwinding = false;
    bool blocked = false;
    bool woken = false;
    std::uint64_t token = 0;
  };

  struct Event {
    std::int64_t t_us;
    std::uint64_t seq;
    Pid pid;  // -1 for callbacks
    std::uint64_t token;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.t_us != b.t_us ? a.t_us > b.t_us : a.seq > b.seq;
    }
  };

  static std::int64_t to_us(double ms);
  Process& proc(Pid pid);
  const Process* find(Pid pid) const;
  void schedule_resume(Process& p, std::int64_t t_us);
  void switch_to(Process& p);
  void yield(Process& p);
  void entry(Process* p);

  std::int64_t now_us_ = 0;
  std::uint64_t seq_ = 0;
  std::uint64_t dispatched_ = 0;
  Pid next_pid_ = 1000;
  Pid current_ = -1;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::map<Pid, std::unique_ptr<Process>> procs_;
  Baton kernel_sem_;
  std::vector<std::string> failures_;
};

}  // namespace qosmw::sim
