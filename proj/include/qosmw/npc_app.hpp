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

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qosmw/executor.hpp"
#include "qosmw/msg_ports.hpp"
#include "qosmw/npc.hpp"
#include "qosmw/partitioner.hpp"
#include "qosmw/qos_service.hpp"

namespace qosmw {

struct ManagerOptions {
  bool adaptive = false;
  bool full_y = false;
  /// Re-dispatch rows of dead workers to survivors once.
  bool recovery = true;
  /// Check the peer TASKSTATE before every blocking read.
  bool fault_guard = true;
  double poll_ms = 1000.0;
  PartitionerOptions partitioner;
};

struct ManagerReport {
  CurrentResult result;
  std::vector<int> partition;
  std::vector<int> dead_workers;
  int recovered_rows = 0;
  /// Empty on success.
  std::string error;
};

/// Manager task: splits the N currents over the workers behind `ports`
/// (port m leads to worker m), scatters, gathers with the dead-peer guard,
/// recovers missing rows once, and releases the workers.
ManagerReport run_manager(const CircuitSpec& spec, std::vector<Port>& ports, QosService& qos, Executor& executor,
                          const ManagerOptions& options);

enum class WorkerPhase { started, received, mid_compute };

struct WorkerOptions {
  /// Simulated cost of one row for one sample, in million CPU cycles.
  double mcycles_per_row_sample = 10.0;
  /// When false, rows are charged for but not computed; zero vectors are
  /// returned.
  bool compute = true;
  bool guard = true;
  double poll_ms = 1000.0;
  /// Observation points, used to inject faults.
  std::function<void(WorkerPhase)> on_phase;
};

/// The manager stopped responding while a worker waited for it.
class WorkerAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WorkerStats {
  int assignments = 0;
  int rows = 0;
};

/// Worker task: computes the rows of each assignment received on `port`
/// until released. Throws WorkerAbort when the manager is gone.
WorkerStats run_worker(Port& port, QosService* qos, Executor& executor, int machine_rank, const WorkerOptions& options);

}  // namespace qosmw
