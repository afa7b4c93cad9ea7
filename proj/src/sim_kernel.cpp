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

#include "qosmw/sim_kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace qosmw::sim {

Kernel::~Kernel() { shutdown(); }

std::int64_t Kernel::to_us(double ms) {
  if (!(ms < 9.0e15)) return std::numeric_limits<std::int64_t>::max();
  return static_cast<std::int64_t>(std::llround(ms * 1000.0));
}

Kernel::Process& Kernel::proc(Pid pid) {
  auto it = procs_.find(pid);
  if (it == procs_.end()) throw std::logic_error("no simulated process " + std::to_string(pid));
  return *it->second;
}

const Kernel::Process* Kernel::find(Pid pid) const {
  auto it = procs_.find(pid);
  return it == procs_.end() ? nullptr : it->second.get();
}

Pid Kernel::spawn(std::string name, std::function<void()> body, double start_ms) {
  auto p = std::make_unique<Process>();
  p->pid = next_pid_++;
  p->name = std::move(name);
  p->body = std::move(body);
  Process* raw = p.get();
  procs_.emplace(raw->pid, std::move(p));
  raw->thread = std::thread(&Kernel::entry, this, raw);
  schedule_resume(*raw, std::max(now_us_, to_us(start_ms)));
  return raw->pid;
}

void Kernel::at(double t_ms, std::function<void()> fn) {
  queue_.push(Event{std::max(now_us_, to_us(t_ms)), seq_++, -1, 0, std::move(fn)});
}

void Kernel::schedule_resume(Process& p, std::int64_t t_us) {
  ++p.token;
  queue_.push(Event{t_us, seq_++, p.pid, p.token, {}});
}

void Kernel::entry(Process* p) {
  p->sem.acquire();
  if (!p->killed) {
    try {
      p->body();
    } catch (const Killed&) {
    } catch (const std::exception& e) {
      failures_.push_back(p->name + ": " + e.what());
    } catch (...) {
      failures_.push_back(p->name + ": unknown exception");
    }
  }
  p->finished = true;
  p->body = nullptr;
  kernel_sem_.release();
}

void Kernel::switch_to(Process& p) {
  current_ = p.pid;
  p.started = true;
  p.sem.release();
  kernel_sem_.acquire();
  current_ = -1;
}

void Kernel::yield(Process& p) {
  kernel_sem_.release();
  p.sem.acquire();
  if (p.killed && !p.unwinding) {
    p.unwinding = true;
    throw Killed{};
  }
}

void Kernel::sleep_until(double t_ms) {
  Process& p = proc(current_);
  if (p.unwinding) return;
  schedule_resume(p, std::max(now_us_, to_us(t_ms)));
  yield(p);
}

void Kernel::sleep_for(double ms) { sleep_until(now_ms() + std::max(0.0, ms)); }

bool Kernel::block(double deadline_ms) {
  Process& p = proc(current_);
  if (p.unwinding) return false;
  p.blocked = true;
  p.woken = false;
  ++p.token;
  if (deadline_ms >= 0) queue_.push(Event{std::max(now_us_, to_us(deadline_ms)), seq_++, p.pid, p.token, {}});
  yield(p);
  p.blocked = false;
  return p.woken;
}

void Kernel::wake(Pid pid) {
  auto it = procs_.find(pid);
  if (it == procs_.end()) return;
  Process& p = *it->second;
  if (p.finished || !p.blocked || p.woken) return;
  p.woken = true;
  schedule_resume(p, now_us_);
}

void Kernel::kill(Pid pid) {
  auto it = procs_.find(pid);
  if (it == procs_.end()) return;
  Process& p = *it->second;
  if (p.finished || p.killed) return;
  p.killed = true;
  if (pid == current_) {
    p.unwinding = true;
    throw Killed{};
  }
  schedule_resume(p, now_us_);
}

bool Kernel::alive(Pid pid) const {
  const Process* p = find(pid);
  return p && !p->finished && !p->killed;
}

bool Kernel::finished(Pid pid) const {
  const Process* p = find(pid);
  return !p || p->finished;
}

const std::string& Kernel::name(Pid pid) const {
  const Process* p = find(pid);
  if (!p) throw std::logic_error("no simulated process " + std::to_string(pid));
  return p->name;
}

Kernel::RunResult Kernel::run(const std::function<bool()>& stop, double limit_ms) {
  if (current_ != -1) throw std::logic_error("Kernel::run called from a simulated process");
  const std::int64_t limit_us = to_us(limit_ms);
  if (stop && stop()) return RunResult::stopped;
  while (!queue_.empty()) {
    if (queue_.top().t_us > limit_us) return RunResult::time_limit;
    Event ev = queue_.top();
    queue_.pop();
    now_us_ = std::max(now_us_, ev.t_us);
    ++dispatched_;
    if (ev.pid < 0) {
      ev.fn();
    } else {
      auto it = procs_.find(ev.pid);
      if (it == procs_.end()) continue;
      Process& p = *it->second;
      if (p.finished || ev.token != p.token) continue;
      switch_to(p);
    }
    if (stop && stop()) return RunResult::stopped;
  }
  return RunResult::idle;
}

void Kernel::shutdown() {
  bool pending = true;
  while (pending) {
    pending = false;
    std::vector<Process*> live;
    for (auto& [pid, p] : procs_) {
      if (!p->finished) live.push_back(p.get());
    }
    for (Process* p : live) {
      p->killed = true;
      if (!p->finished) switch_to(*p);
      if (!p->finished) pending = true;
    }
  }
  for (auto& [pid, p] : procs_) {
    if (p->thread.joinable()) p->thread.join();
  }
  queue_ = {};
}

}  // namespace qosmw::sim
