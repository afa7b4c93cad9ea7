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

#include "qosmw/qos_manager.hpp"

#include <algorithm>

namespace qosmw {

QosManager::QosManager(AtgPtr atg, int machine_rank, ManagerConfig config, Transport& transport,
                       Executor& executor, ProbeProvider& provider)
    : atg_(std::move(atg)),
      rank_(machine_rank),
      config_(config),
      transport_(transport),
      executor_(executor),
      provider_(provider),
      local_(atg_, machine_rank),
      peers_(peer_machine_set(*atg_, machine_rank)),
      enabled_(config.enabled),
      period_ms_(config.period_ms) {
  if (!(config.period_ms > 0)) throw QosError("monitoring period must be positive");
  if (is_master()) global_ = std::make_unique<GlobalQosStore>(atg_);
  ring_ = token_ring(*atg_);
  has_token_ = initial_token_holder(*atg_) == rank_;
  self_path_.bind(rank_, [this](const Frame& f) { return serve_request(f); });
}

Frame QosManager::serve_request(const Frame& req) {
  try {
    switch (req.opcode) {
      case opcode::kPing:
        return Frame{opcode::kPing, {}};
      case opcode::kGetMachAttrs:
        return Frame{opcode::kGetMachAttrs, to_bytes(encode_machine_report(local_.own_report()))};
      case opcode::kGetAppView: {
        if (!global_) return make_error("not the master machine");
        const auto reports = global_->reports();
        return Frame{opcode::kGetAppView, to_bytes(encode_app_payload(global_->stamp(), reports))};
      }
      case opcode::kReportTaskState: {
        auto [task, state] = decode_task_report(to_string(req.payload));
        if (task < 0 || task >= atg_->num_tasks() || atg_->machine_of(task) != rank_) {
          return make_error("task is not hosted here");
        }
        local_.write_task_state(task, state);
        executor_.notify_all();
        return Frame{opcode::kReportTaskState, {}};
      }
      case opcode::kListPids: {
        auto pids = provider_.list_pids(rank_);
        return Frame{opcode::kListPids, to_bytes(encode_pids(pids.value_or(std::set<std::int64_t>{})))};
      }
      case opcode::kEchoSmall:
      case opcode::kEchoBulk:
        return Frame{req.opcode, req.payload};
      case opcode::kToken: {
        const auto generation = decode_token(to_string(req.payload));
        std::lock_guard lk(mu_);
        has_token_ = true;
        generation_ = generation;
        return Frame{opcode::kToken, {}};
      }
      default:
        return make_error("unknown opcode");
    }
  } catch (const WireError& e) {
    return make_error(std::string("malformed request: ") + e.what());
  } catch (const QosError& e) {
    return make_error(e.what());
  }
}

MachineAttributes QosManager::read_local_attrs() {
  MachineAttributes a = local_.machine_attrs(rank_);
  try {
    a.os_type = provider_.os_type();
    a.cpu_speed_mhz = provider_.cpu_speed_mhz();
    a.num_cpus = provider_.num_cpus();
    a.workload = std::max(0.0, provider_.workload());
    a.free_ram_bytes = provider_.free_ram_bytes();
    a.free_swap_bytes = provider_.free_swap_bytes();
    a.effective_speed_mhz = effective_speed(a.num_cpus, a.workload, a.cpu_speed_mhz);
    a.mach_state = MachState::up;
  } catch (const ProbeError&) {
  }
  return a;
}

void QosManager::run_loop() {
  while (!shutdown_) {
    executor_.wait_until([this] { return shutdown_ || enabled_; }, -1.0);
    if (shutdown_) break;
    if (!bootstrapped_) {
      bootstrapped_ = true;
      local_.write_machine_attrs(rank_, read_local_attrs());
      executor_.busy_cpu(rank_, config_.launch_cpu_ms);
      if (shutdown_) break;
    }
    const double start = executor_.now_ms();
    run_cycle();
    const double next = start + period_ms_;
    executor_.wait_until([this] { return bool(shutdown_); }, std::max(0.0, next - executor_.now_ms()));
  }
}

QosManager::FetchResult QosManager::fetch_report(int peer, MachineReport& out) {
  const double start = executor_.now_ms();
  const double timeout = config_.ping.timeout_ms;
  auto reply = transport_.request(rank_, peer, Frame{opcode::kGetMachAttrs, {}}, timeout);
  if (reply && reply->opcode == opcode::kGetMachAttrs) {
    try {
      out = decode_machine_report(to_string(reply->payload));
      if (out.machine_rank == peer) return FetchResult::ok;
    } catch (const WireError&) {
    }
    return FetchResult::no_report;
  }
  if (reply) return FetchResult::no_report;
  // Second chance within the 2 x timeout budget.
  executor_.sleep_for(config_.ping.gap_ms);
  const double left = 2.0 * timeout - (executor_.now_ms() - start);
  if (left > 0 && provider_.ping(peer, std::min(timeout, left))) return FetchResult::no_report;
  return FetchResult::down;
}

void QosManager::measure_and_pass(CycleUpdate& u) {
  const std::int64_t stamp = local_.stamp() + 1;
  for (int l : designated_links(*atg_, rank_)) {
    const auto& link = atg_->link(l);
    const int ma = atg_->machine_of(link.a.task_rank);
    const int mb = atg_->machine_of(link.b.task_rank);
    const int other = ma == rank_ ? mb : ma;
    LinkAttributes prev = local_.link_attrs(l);
    if (u.peers_down.count(other)) {
      prev.stale = true;
      u.measured_links[l] = prev;
      continue;
    }
    const double begin = executor_.now_ms();
    Transport& path = other == rank_ ? static_cast<Transport&>(self_path_) : transport_;
    auto m = measure_link(path, executor_, rank_, other, l, stamp, config_.echo);
    const double end = executor_.now_ms();
    {
      std::lock_guard lk(mu_);
      measure_log_.push_back({rank_, l, begin, end});
    }
    if (m) {
      u.measured_links[l] = LinkAttributes{m->latency_ms, m->throughput_mbps, stamp, false};
    } else {
      prev.stale = true;
      u.measured_links[l] = prev;
    }
  }

  TokenState ts;
  {
    std::lock_guard lk(mu_);
    ts = TokenState{ring_, rank_, generation_};
    has_token_ = false;
  }
  auto index_of = [&](int r) { return std::find(ring_.begin(), ring_.end(), r) - ring_.begin(); };
  auto next = pass_token(ts, [&](int r) {
    if (r == rank_) return true;
    const std::int64_t g = index_of(r) <= index_of(rank_) ? ts.generation + 1 : ts.generation;
    auto reply = transport_.request(rank_, r, Frame{opcode::kToken, to_bytes(encode_token(g))}, config_.ping.timeout_ms);
    return reply && reply->opcode == opcode::kToken;
  });
  if (next.holder == rank_) {
    std::lock_guard lk(mu_);
    has_token_ = true;
    generation_ = next.generation;
  }
}

void QosManager::run_cycle() {
  const double start = executor_.now_ms();
  executor_.busy_cpu(rank_, config_.cycle_cpu_ms);

  CycleUpdate u;
  u.own_attrs = probe_machine(provider_, rank_, local_.machine_attrs(rank_), config_.ping);

  for (int t : atg_->tasks_on(rank_)) {
    const TaskState s = local_.task_state(t);
    if (s.phase != TaskPhase::running) continue;
    if (task_state(provider_, s, rank_, config_.ping) == TaskPhase::dead) u.local_deaths[t] = s.pid;
  }

  for (int p : peers_) {
    MachineReport r;
    switch (fetch_report(p, r)) {
      case FetchResult::ok:
        u.peer_reports.push_back(std::move(r));
        break;
      case FetchResult::no_report:
        break;
      case FetchResult::down:
        u.peers_down.insert(p);
        break;
    }
  }

  bool token;
  {
    std::lock_guard lk(mu_);
    token = has_token_;
  }
  if (token) measure_and_pass(u);

  local_.commit_cycle(u);
  if (global_) assemble_global(u);
  {
    std::lock_guard lk(mu_);
    cycle_starts_.push_back(start);
  }
  executor_.notify_all();
}

void QosManager::assemble_global(const CycleUpdate& u) {
  std::map<int, MachineReport> fresh;
  std::set<int> down = u.peers_down;
  for (const auto& r : u.peer_reports) fresh[r.machine_rank] = r;
  fresh[rank_] = local_.own_report();
  for (const auto& m : atg_->machines()) {
    if (fresh.count(m.rank) || down.count(m.rank) || peers_.count(m.rank)) continue;
    // No task there, so no manager to answer.
    if (atg_->tasks_on(m.rank).empty()) continue;
    MachineReport r;
    switch (fetch_report(m.rank, r)) {
      case FetchResult::ok:
        fresh[m.rank] = std::move(r);
        break;
      case FetchResult::no_report:
        break;
      case FetchResult::down:
        down.insert(m.rank);
        break;
    }
  }
  std::vector<MachineReport> reports;
  for (const auto& m : atg_->machines()) {
    MachineReport r;
    if (auto it = fresh.find(m.rank); it != fresh.end()) {
      r = it->second;
    } else if (auto old = last_reports_.find(m.rank); old != last_reports_.end()) {
      r = old->second;
    } else {
      r.machine_rank = m.rank;
      for (int t : atg_->tasks_on(m.rank)) r.tasks[t] = TaskState{};
    }
    if (down.count(m.rank)) {
      r.attrs.mach_state = MachState::down;
      for (auto& [t, s] : r.tasks) {
        if (s.phase == TaskPhase::running) s.phase = TaskPhase::dead;
      }
    }
    // Terminal states already published stay terminal.
    if (auto old = last_reports_.find(m.rank); old != last_reports_.end()) {
      for (auto& [t, s] : r.tasks) {
        auto prev = old->second.tasks.find(t);
        if (prev != old->second.tasks.end() && prev->second.terminal()) s = prev->second;
      }
    }
    last_reports_[m.rank] = r;
    reports.push_back(std::move(r));
  }
  global_->commit(std::move(reports));
}

void QosManager::stop() {
  enabled_ = false;
  executor_.notify_all();
}

void QosManager::resume() {
  enabled_ = true;
  executor_.notify_all();
}

void QosManager::set_period(double period_ms) {
  if (!(period_ms > 0)) throw QosError("monitoring period must be positive");
  period_ms_ = period_ms;
}

void QosManager::shutdown() {
  shutdown_ = true;
  executor_.notify_all();
}

bool QosManager::holds_token() const {
  std::lock_guard lk(mu_);
  return has_token_;
}

std::int64_t QosManager::token_generation() const {
  std::lock_guard lk(mu_);
  return generation_;
}

std::vector<double> QosManager::cycle_starts() const {
  std::lock_guard lk(mu_);
  return cycle_starts_;
}

std::vector<MeasureInterval> QosManager::measure_log() const {
  std::lock_guard lk(mu_);
  return measure_log_;
}

// ---------------------------------------------------------------------------

QosManager& ManagerDirectory::launch(int machine_rank, const std::function<std::unique_ptr<QosManager>()>& make) {
  std::lock_guard lk(mu_);
  auto it = managers_.find(machine_rank);
  if (it != managers_.end()) return *it->second;
  auto m = make();
  if (!m || m->machine_rank() != machine_rank) throw QosError("manager built for the wrong machine");
  return *managers_.emplace(machine_rank, std::move(m)).first->second;
}

QosManager* ManagerDirectory::find(int machine_rank) {
  std::lock_guard lk(mu_);
  auto it = managers_.find(machine_rank);
  return it == managers_.end() ? nullptr : it->second.get();
}

std::vector<QosManager*> ManagerDirectory::all() {
  std::lock_guard lk(mu_);
  std::vector<QosManager*> out;
  for (auto& [r, m] : managers_) out.push_back(m.get());
  return out;
}

std::size_t ManagerDirectory::size() const {
  std::lock_guard lk(mu_);
  return managers_.size();
}

}  // namespace qosmw
