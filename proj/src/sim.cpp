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

#include "qosmw/sim.hpp"

#include <algorithm>
#include <stdexcept>

namespace qosmw {

SimCluster::SimCluster(sim::Kernel& kernel, std::vector<SimMachineConfig> machines, SimLinkConfig default_link)
    : kernel_(kernel), default_link_(default_link) {
  for (auto& m : machines) {
    if (m.num_cpus < 1 || !(m.cpu_speed_mhz > 0)) throw std::invalid_argument("bad simulated machine " + m.name);
    State st;
    st.cfg = std::move(m);
    machines_.push_back(std::move(st));
  }
}

const SimMachineConfig& SimCluster::machine(int rank) const { return machines_.at(rank).cfg; }

void SimCluster::set_load(int rank, LoadSchedule load) { machines_.at(rank).cfg.load = std::move(load); }

void SimCluster::set_link(int a, int b, SimLinkConfig link) {
  if (!(link.rate_mbps > 0) || !(link.latency_ms >= 0)) throw std::invalid_argument("bad simulated link");
  links_[{std::min(a, b), std::max(a, b)}] = link;
}

SimLinkConfig SimCluster::link(int a, int b) const {
  auto it = links_.find({std::min(a, b), std::max(a, b)});
  return it == links_.end() ? default_link_ : it->second;
}

double SimCluster::workload(int rank) const { return machines_.at(rank).cfg.load.at(kernel_.now_ms()); }

double SimCluster::effective_speed_at(int rank, double t_ms) const {
  const auto& c = machines_.at(rank).cfg;
  return effective_speed(c.num_cpus, c.load.at(t_ms), c.cpu_speed_mhz);
}

bool SimCluster::up(int rank) const { return machines_.at(rank).up; }

void SimCluster::set_up(int rank, bool up) {
  auto& m = machines_.at(rank);
  m.up = up;
  if (up) return;
  const sim::Pid self = kernel_.current();
  bool kill_self = false;
  for (auto pid : m.pids) {
    if (pid == self) {
      kill_self = true;
    } else {
      kernel_.kill(pid);
    }
  }
  if (kill_self) kernel_.kill(self);
}

sim::Pid SimCluster::spawn_on(int rank, std::string name, std::function<void()> body, double start_ms) {
  auto& m = machines_.at(rank);
  if (!m.up) throw std::runtime_error("machine " + m.cfg.name + " is down");
  const auto pid = kernel_.spawn(std::move(name), std::move(body), start_ms);
  m.pids.insert(pid);
  return pid;
}

std::set<std::int64_t> SimCluster::live_pids(int rank) const {
  std::set<std::int64_t> out;
  for (auto pid : machines_.at(rank).pids) {
    if (kernel_.alive(pid)) out.insert(pid);
  }
  return out;
}

void SimCluster::add_stolen_cpu(int rank, double ms) { machines_.at(rank).stolen_ms += ms; }

double SimCluster::stolen_cpu(int rank) const { return machines_.at(rank).stolen_ms; }

double SimCluster::transfer_ms(int from, int to, std::size_t bytes) const {
  if (from == to) return 0.0;
  const auto l = link(from, to);
  return l.latency_ms + static_cast<double>(bytes) * 8.0 / (l.rate_mbps * 1e3);
}

double SimCluster::transmit(int from, int to, std::size_t bytes) {
  const double now = kernel_.now_ms();
  if (from == to) return now;
  const auto l = link(from, to);
  auto& nic = machines_.at(from).nic_free_ms;
  const double start = std::max(now, nic);
  const double tx = static_cast<double>(bytes) * 8.0 / (l.rate_mbps * 1e3);
  nic = start + tx;
  return start + tx + l.latency_ms;
}

// ---------------------------------------------------------------------------

bool SimExecutor::wait_until(const std::function<bool()>& ready, double timeout_ms) {
  const double deadline = timeout_ms < 0 ? -1.0 : kernel_.now_ms() + timeout_ms;
  while (true) {
    if (ready()) return true;
    // The clock has microsecond resolution.
    if (deadline >= 0 && kernel_.now_ms() + 5e-4 >= deadline) return false;
    const sim::Pid self = kernel_.current();
    waiters_.insert(self);
    bool woken = false;
    try {
      woken = kernel_.block(deadline);
    } catch (...) {
      waiters_.erase(self);
      throw;
    }
    waiters_.erase(self);
    // An unbounded block only returns unwoken while the process unwinds.
    if (!woken && deadline < 0) return ready();
  }
}

void SimExecutor::notify_all() {
  const auto waiting = waiters_;
  for (auto pid : waiting) kernel_.wake(pid);
}

void SimExecutor::consume_cpu(int machine_rank, double mcycles) {
  double remaining = std::max(0.0, mcycles);
  double stolen_seen = cluster_.stolen_cpu(machine_rank);
  const auto& load = cluster_.machine(machine_rank).load;
  while (remaining > 1e-9) {
    double t = kernel_.now_ms();
    auto change = load.next_change_after(t);
    if (change && *change - t < 1e-3) {
      t = *change;
      change = load.next_change_after(t);
    }
    const double speed = cluster_.effective_speed_at(machine_rank, t);
    const double need_ms = remaining / speed * 1000.0;
    if (change && kernel_.now_ms() + need_ms > *change) {
      remaining -= (*change - kernel_.now_ms()) * speed / 1000.0;
      kernel_.sleep_until(*change);
    } else {
      kernel_.sleep_for(need_ms);
      remaining = 0;
    }
  }
  while (true) {
    const double stolen = cluster_.stolen_cpu(machine_rank);
    const double extra = stolen - stolen_seen;
    stolen_seen = stolen;
    if (extra <= 0) break;
    kernel_.sleep_for(extra);
  }
}

void SimExecutor::busy_cpu(int machine_rank, double ms) {
  if (ms <= 0) return;
  cluster_.add_stolen_cpu(machine_rank, ms);
  kernel_.sleep_for(ms);
}

// ---------------------------------------------------------------------------

void SimTransport::bind(int rank, FrameHandler handler) { handlers_[rank] = std::move(handler); }

void SimTransport::unbind(int rank) { handlers_.erase(rank); }

std::optional<Frame> SimTransport::request(int from, int to, const Frame& request, double timeout_ms) {
  auto& kernel = cluster_.kernel();
  const double start = kernel.now_ms();
  auto give_up = [&]() -> std::optional<Frame> {
    kernel.sleep_until(start + timeout_ms);
    return std::nullopt;
  };
  auto handler = [&]() -> const FrameHandler* {
    if (!cluster_.up(to)) return nullptr;
    auto it = handlers_.find(to);
    return it == handlers_.end() ? nullptr : &it->second;
  };
  if (!handler()) return give_up();
  kernel.sleep_for(cluster_.transfer_ms(from, to, 5 + request.payload.size()));
  const FrameHandler* h = handler();
  if (!h) return give_up();
  Frame reply = (*h)(request);
  const double back = cluster_.transfer_ms(to, from, 5 + reply.payload.size());
  if (kernel.now_ms() + back - start > timeout_ms) return give_up();
  kernel.sleep_for(back);
  return reply;
}

// ---------------------------------------------------------------------------

SimProbeProvider::SimProbeProvider(int own_rank, SimCluster& cluster, Transport& transport, Executor& executor)
    : WireProbeProvider(own_rank, transport, executor), cluster_(cluster) {}

std::string SimProbeProvider::os_type() { return cluster_.machine(own_rank_).os_type; }
double SimProbeProvider::cpu_speed_mhz() { return cluster_.machine(own_rank_).cpu_speed_mhz; }
int SimProbeProvider::num_cpus() { return cluster_.machine(own_rank_).num_cpus; }
double SimProbeProvider::workload() { return cluster_.workload(own_rank_); }
std::int64_t SimProbeProvider::free_ram_bytes() { return cluster_.machine(own_rank_).free_ram_bytes; }
std::int64_t SimProbeProvider::free_swap_bytes() { return cluster_.machine(own_rank_).free_swap_bytes; }
std::set<std::int64_t> SimProbeProvider::local_pids() { return cluster_.live_pids(own_rank_); }

// ---------------------------------------------------------------------------

SimMessageNetwork::SimMessageNetwork(SimCluster& cluster, const Atg& atg, MailboxSet& mailboxes,
                                     std::function<bool(int)> task_alive)
    : cluster_(cluster), atg_(atg), mailboxes_(mailboxes), task_alive_(std::move(task_alive)) {}

void SimMessageNetwork::send(int src_task, int src_port, const Message& msg, bool sync) {
  const PortPeer peer = atg_.port_peer(src_task, src_port);
  const int from = atg_.machine_of(src_task);
  const int to = peer.machine_rank;
  const std::size_t bytes = 5 + 8 + msg.payload.size();
  const double arrival = cluster_.transmit(from, to, bytes);
  auto outcome = std::make_shared<int>(0);
  auto& kernel = cluster_.kernel();
  kernel.at(arrival, [this, peer, to, msg, outcome, src_task, src_port, sync] {
    if (cluster_.up(to) && task_alive_(peer.task_rank)) {
      mailboxes_.deliver(peer.task_rank, peer.port_index, msg);
      ++delivered_;
      *outcome = 1;
    } else {
      *outcome = -1;
      if (!sync) async_errors_.try_emplace({src_task, src_port}, "peer unreachable");
    }
  });
  if (!sync) {
    auto& last = last_arrival_[{src_task, src_port}];
    last = std::max(last, arrival);
    return;
  }
  kernel.sleep_until(arrival + (from == to ? 0.0 : cluster_.link(from, to).latency_ms));
  if (*outcome != 1) throw PeerUnreachable("peer unreachable");
}

void SimMessageNetwork::drain(int src_task, int src_port) {
  auto it = last_arrival_.find({src_task, src_port});
  if (it != last_arrival_.end() && it->second > cluster_.kernel().now_ms()) cluster_.kernel().sleep_until(it->second);
}

std::optional<std::string> SimMessageNetwork::take_async_error(int src_task, int src_port) {
  auto it = async_errors_.find({src_task, src_port});
  if (it == async_errors_.end()) return std::nullopt;
  std::string e = it->second;
  async_errors_.erase(it);
  return e;
}

}  // namespace qosmw
