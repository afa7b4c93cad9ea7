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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qosmw/atg.hpp"
#include "qosmw/npc_app.hpp"
#include "qosmw/probes.hpp"
#include "qosmw/qos_manager.hpp"
#include "qosmw/sim.hpp"
#include "qosmw/transport.hpp"

namespace qosmw {

/// Worker `worker` (index behind the manager's port of the same number) is
/// killed when it reaches `at`.
struct FaultSpec {
  /// Zero-based worker index, equal to the manager port leading to it.
  int worker = 0;
  WorkerPhase at = WorkerPhase::started;
};

/// Managers, tasks, and message network of one application on a simulated
/// cluster. Every machine hosting a task (and the master) gets one manager.
class SimDeployment {
 public:
  SimDeployment(AtgPtr atg, std::vector<SimMachineConfig> machines, ManagerConfig manager_config,
                SimLinkConfig link = {});
  ~SimDeployment();
  SimDeployment(const SimDeployment&) = delete;
  SimDeployment& operator=(const SimDeployment&) = delete;

  const Atg& atg() const { return *atg_; }
  sim::Kernel& kernel() { return kernel_; }
  SimCluster& cluster() { return *cluster_; }
  SimExecutor& executor() { return *executor_; }
  SimTransport& sim_transport() { return *sim_transport_; }
  /// Logs every QoS request.
  RecordingTransport& transport() { return *transport_; }
  MailboxSet& mailboxes() { return *mailboxes_; }
  SimMessageNetwork& messages() { return *messages_; }

  bool has_manager(int machine_rank) { return managers_.find(machine_rank) != nullptr; }
  QosManager& manager(int machine_rank);
  std::vector<QosManager*> managers() { return managers_.all(); }

  /// Starts every manager's monitoring loop.
  void start_monitoring(double at_ms = 0.0);
  /// Shuts every manager down and runs until their loops have exited.
  void stop_monitoring();
  /// Monitoring loops still alive.
  int monitoring_processes() const;

  /// Starts a task on its machine. It reports running on entry and
  /// completed when `body` returns.
  sim::Pid spawn_task(int task_rank, std::function<void(QosService&)> body, double start_ms = 0.0);
  std::optional<sim::Pid> task_pid(int task_rank) const;
  bool task_alive(int task_rank) const;

 private:
  AtgPtr atg_;
  sim::Kernel kernel_;
  std::unique_ptr<SimCluster> cluster_;
  std::unique_ptr<SimExecutor> executor_;
  std::unique_ptr<SimTransport> sim_transport_;
  std::unique_ptr<RecordingTransport> transport_;
  std::vector<std::unique_ptr<SimProbeProvider>> providers_;
  ManagerDirectory managers_;
  std::unique_ptr<MailboxSet> mailboxes_;
  std::unique_ptr<SimMessageNetwork> messages_;
  std::map<int, sim::Pid> task_pids_;
  std::vector<sim::Pid> manager_pids_;
};

struct SimAppConfig {
  /// Task graph; built with make_manager_worker_atg(workers) when null.
  AtgPtr atg;
  int workers = 6;
  int n = 60;
  int s = 500;
  std::uint64_t seed = 1;
  bool conjugate_symmetric = false;

  bool adaptive = false;
  bool monitoring = true;
  double period_ms = 30000.0;
  /// Middleware CPU cost model for simulated machines.
  double cycle_cpu_ms = 300.0;
  double launch_cpu_ms = 8000.0;

  LoadScenario scenario;
  SimLinkConfig link;
  double cpu_speed_mhz = 333.0;

  ManagerOptions manager;
  WorkerOptions worker;

  std::optional<FaultSpec> fault;
  double time_limit_ms = 48.0 * 3600.0 * 1000.0;
};

struct SimAppResult {
  bool ok = false;
  std::string error;
  /// From t = 0 to the manager task's completion, virtual ms.
  double elapsed_ms = 0.0;
  /// Time the application tasks were started.
  double tasks_started_ms = 0.0;
  ManagerReport report;
  std::vector<std::string> failures;
  std::map<int, std::vector<double>> cycle_starts;
  std::vector<MeasureInterval> measurements;
  std::vector<TrafficRecord> traffic;
  std::int64_t final_global_stamp = 0;
  std::uint64_t events = 0;
  /// Monitoring loops left after the application finished.
  int managers_left = 0;
};

/// Deploys the application and its middleware on a simulated cluster with
/// one machine per task-graph machine, and runs it to completion.
SimAppResult run_sim_app(const SimAppConfig& config);

/// Named loads: "idle", "load1" (three workers at workload 2), "load2" (two
/// at 2, two oscillating 2 <-> 0 every 6 s, in phase). Anything else is read
/// as a scenario file.
LoadScenario builtin_or_file_scenario(const std::string& name);

// ---------------------------------------------------------------------------
// Experiments

struct Cell {
  int n = 0;
  int s = 0;
  double no_ms = 0.0;
  double with_ms = 0.0;
  bool no_ok = true;
  bool with_ok = true;

  /// (No - With) / No * 100.
  double diff_pct() const;
};

struct AdaptationConfig {
  std::string load = "load1";
  std::vector<int> ns{12, 30, 60};
  std::vector<int> ss{500, 1000, 1500, 2000};
  int reps = 3;
  std::uint64_t seed = 1;
  double period_ms = 30000.0;
  SimAppConfig base;
};

struct AdaptationReport {
  std::string load;
  int reps = 0;
  std::uint64_t seed = 0;
  std::vector<int> ns;
  std::vector<int> ss;
  std::vector<Cell> cells;

  const Cell& cell(int n, int s) const;
};

/// "No QoS" runs non-adaptive with monitoring off; "With QoS" runs adaptive
/// with monitoring at the configured period. Each cell averages `reps`
/// repetitions with seeds seed, seed+1, ...
AdaptationReport run_adaptation_experiment(const AdaptationConfig& config);
std::string to_tsv(const AdaptationReport& r);

struct OverheadConfig {
  int n = 60;
  std::vector<int> ss{500, 1000, 1500, 2000};
  std::vector<double> periods_ms{5000.0, 30000.0, 60000.0};
  int reps = 3;
  std::uint64_t seed = 1;
  SimAppConfig base;
};

struct OverheadReport {
  int n = 0;
  int reps = 0;
  std::uint64_t seed = 0;
  std::vector<int> ss;
  std::vector<double> periods_ms;
  /// Monitoring off, per vector size.
  std::map<int, double> off_ms;
  std::map<std::pair<double, int>, double> on_ms;
  std::map<int, bool> off_ok;
  std::map<std::pair<double, int>, bool> on_ok;

  /// (Off - On) / Off * 100; negative values are overhead.
  double diff_pct(double period_ms, int s) const;
};

/// Non-adaptive, fault guard off, idle machines: monitoring off against
/// each period.
OverheadReport run_overhead_experiment(const OverheadConfig& config);
std::string to_tsv(const OverheadReport& r);

}  // namespace qosmw
