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
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "qosmw/executor.hpp"
#include "qosmw/msg_ports.hpp"
#include "qosmw/probes.hpp"
#include "qosmw/sim_kernel.hpp"
#include "qosmw/transport.hpp"

namespace qosmw {

struct SimMachineConfig {
  std::string name;
  std::string os_type = "SimOS";
  double cpu_speed_mhz = 333.0;
  int num_cpus = 1;
  std::int64_t free_ram_bytes = 128ll << 20;
  std::int64_t free_swap_bytes = 256ll << 20;
  LoadSchedule load = LoadSchedule::idle();
};

struct SimLinkConfig {
  double latency_ms = 1.0;
  double rate_mbps = 100.0;
};

/// Simulated machines and network on top of a Kernel. Machines carry a
/// scripted background load; each machine's network interface sends one
/// transfer at a time.
class SimCluster {
 public:
  SimCluster(sim::Kernel& kernel, std::vector<SimMachineConfig> machines, SimLinkConfig default_link = {});

  sim::Kernel& kernel() { return kernel_; }
  int num_machines() const { return static_cast<int>(machines_.size()); }
  const SimMachineConfig& machine(int rank) const;
  void set_load(int rank, LoadSchedule load);

  void set_link(int a, int b, SimLinkConfig link);
  SimLinkConfig link(int a, int b) const;

  double workload(int rank) const;
  double effective_speed_at(int rank, double t_ms) const;

  bool up(int rank) const;
  /// Taking a machine down kills every process running on it.
  void set_up(int rank, bool up);

  sim::Pid spawn_on(int rank, std::string name, std::function<void()> body, double start_ms = 0.0);
  /// Live processes started with spawn_on on the machine.
  std::set<std::int64_t> live_pids(int rank) const;

  void add_stolen_cpu(int rank, double ms);
  double stolen_cpu(int rank) const;

  /// Queues `bytes` on the sender's interface; returns the arrival time.
  double transmit(int from, int to, std::size_t bytes);
  /// One-way delay of an uncontended transfer.
  double transfer_ms(int from, int to, std::size_t bytes) const;

 private:
  struct State {
    SimMachineConfig cfg;
    bool up = true;
    std::set<sim::Pid> pids;
    double stolen_ms = 0.0;
    double nic_free_ms = 0.0;
  };

  sim::Kernel& kernel_;
  std::vector<State> machines_;
  SimLinkConfig default_link_;
  std::map<std::pair<int, int>, SimLinkConfig> links_;
};

class SimExecutor final : public Executor {
 public:
  explicit SimExecutor(SimCluster& cluster) : cluster_(cluster), kernel_(cluster.kernel()) {}

  double now_ms() const override { return kernel_.now_ms(); }
  void sleep_for(double ms) override { kernel_.sleep_for(ms); }
  bool wait_until(const std::function<bool()>& ready, double timeout_ms) override;
  void notify_all() override;
  /// Advances virtual time by the work at the machine's effective speed,
  /// following load changes, plus any CPU the middleware took meanwhile.
  void consume_cpu(int machine_rank, double mcycles) override;
  void busy_cpu(int machine_rank, double ms) override;
  std::int64_t self_pid() override { return kernel_.current(); }

 private:
  SimCluster& cluster_;
  sim::Kernel& kernel_;
  std::set<sim::Pid> waiters_;
};

/// QoS wire transport over the simulated network. A request costs the
/// one-way delay each way; down or unbound machines answer nothing and the
/// caller waits out the timeout.
class SimTransport final : public Transport {
 public:
  explicit SimTransport(SimCluster& cluster) : cluster_(cluster) {}

  void bind(int rank, FrameHandler handler);
  void unbind(int rank);
  std::optional<Frame> request(int from, int to, const Frame& request, double timeout_ms) override;

 private:
  SimCluster& cluster_;
  std::map<int, FrameHandler> handlers_;
};

class SimProbeProvider final : public WireProbeProvider {
 public:
  SimProbeProvider(int own_rank, SimCluster& cluster, Transport& transport, Executor& executor);

  std::string os_type() override;
  double cpu_speed_mhz() override;
  int num_cpus() override;
  double workload() override;
  std::int64_t free_ram_bytes() override;
  std::int64_t free_swap_bytes() override;
  std::set<std::int64_t> local_pids() override;

 private:
  SimCluster& cluster_;
};

/// Task messages over the simulated network. A message reaches the peer's
/// mailbox at its arrival time if the peer task is alive then.
class SimMessageNetwork final : public MessageNetwork {
 public:
  SimMessageNetwork(SimCluster& cluster, const Atg& atg, MailboxSet& mailboxes, std::function<bool(int)> task_alive);

  void send(int src_task, int src_port, const Message& msg, bool sync) override;
  std::optional<std::string> take_async_error(int src_task, int src_port) override;
  void drain(int src_task, int src_port) override;

  std::uint64_t delivered() const { return delivered_; }

 private:
  SimCluster& cluster_;
  const Atg& atg_;
  MailboxSet& mailboxes_;
  std::function<bool(int)> task_alive_;
  std::map<std::pair<int, int>, std::string> async_errors_;
  std::map<std::pair<int, int>, double> last_arrival_;
  std::uint64_t delivered_ = 0;
};

}  // namespace qosmw
