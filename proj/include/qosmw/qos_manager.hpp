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

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <vector>

#include "qosmw/executor.hpp"
#include "qosmw/netmeter.hpp"
#include "qosmw/probes.hpp"
#include "qosmw/qos_store.hpp"
#include "qosmw/transport.hpp"

namespace qosmw {

struct ManagerConfig {
  double period_ms = 30000.0;
  PingPolicy ping;
  EchoPolicy echo;
  bool enabled = true;
  /// CPU the middleware takes on its machine per cycle and once at launch.
  /// Only simulated executors account for it.
  double cycle_cpu_ms = 0.0;
  double launch_cpu_ms = 0.0;
};

struct MeasureInterval {
  int machine_rank = 0;
  int link_id = 0;
  double begin_ms = 0.0;
  double end_ms = 0.0;
};

/// Per-machine monitoring daemon. Runs the periodic cycle, answers the wire
/// protocol, and on the master assembles the application snapshot.
class QosManager {
 public:
  QosManager(AtgPtr atg, int machine_rank, ManagerConfig config, Transport& transport, Executor& executor,
             ProbeProvider& provider);

  const Atg& atg() const { return *atg_; }
  const AtgPtr& atg_ptr() const { return atg_; }
  int machine_rank() const { return rank_; }
  bool is_master() const { return rank_ == atg_->master_rank(); }

  LocalQosStore& local() { return local_; }
  const LocalQosStore& local() const { return local_; }
  /// Null except on the master.
  GlobalQosStore* global() { return global_.get(); }

  Transport& transport() { return transport_; }
  Executor& executor() { return executor_; }
  ProbeProvider& provider() { return provider_; }
  const PingPolicy& ping_policy() const { return config_.ping; }

  /// Wire protocol entry point; never blocks.
  Frame serve_request(const Frame& request);

  /// Periodic loop; returns after shutdown().
  void run_loop();
  /// One monitoring cycle.
  void run_cycle();

  void stop();
  void resume();
  bool enabled() const { return enabled_; }
  /// Throws QosError for a non-positive period. Applies from the next wait.
  void set_period(double period_ms);
  double period() const { return period_ms_; }
  void shutdown();
  bool is_shut_down() const { return shutdown_; }

  bool holds_token() const;
  std::int64_t token_generation() const;

  /// Start times of completed cycles.
  std::vector<double> cycle_starts() const;
  std::vector<MeasureInterval> measure_log() const;

 private:
  enum class FetchResult { ok, no_report, down };
  FetchResult fetch_report(int peer, MachineReport& out);
  MachineAttributes read_local_attrs();
  void measure_and_pass(CycleUpdate& u);
  void assemble_global(const CycleUpdate& u);

  AtgPtr atg_;
  int rank_;
  ManagerConfig config_;
  Transport& transport_;
  Executor& executor_;
  ProbeProvider& provider_;
  // Links between two tasks of this machine are metered in-process.
  LoopbackTransport self_path_;
  LocalQosStore local_;
  std::unique_ptr<GlobalQosStore> global_;
  std::set<int> peers_;

  std::atomic<bool> enabled_;
  std::atomic<bool> shutdown_{false};
  std::atomic<double> period_ms_;
  bool bootstrapped_ = false;

  mutable std::mutex mu_;
  bool has_token_ = false;
  std::int64_t generation_ = 0;
  std::vector<int> ring_;
  std::vector<double> cycle_starts_;
  std::vector<MeasureInterval> measure_log_;
  std::map<int, MachineReport> last_reports_;
};

/// One manager per machine, created by whichever local task launches first.
class ManagerDirectory {
 public:
  /// The machine's manager, built with `make` on the first call only.
  QosManager& launch(int machine_rank, const std::function<std::unique_ptr<QosManager>()>& make);
  QosManager* find(int machine_rank);
  std::vector<QosManager*> all();
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<int, std::unique_ptr<QosManager>> managers_;
};

}  // namespace qosmw
