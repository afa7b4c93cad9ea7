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
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qosmw/attributes.hpp"
#include "qosmw/executor.hpp"
#include "qosmw/transport.hpp"

namespace qosmw {

class ProbeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// CPU speed a job sees on a machine with `num_cpus` CPUs of at least
/// `min_cpu_speed_mhz` and run-queue length `workload`:
///   factor = 1                          if 1 + workload <= num_cpus
///          = num_cpus / (1 + workload)  otherwise
/// Throws std::invalid_argument outside num_cpus >= 1, workload >= 0,
/// min_cpu_speed_mhz > 0.
double effective_speed(int num_cpus, double workload, double min_cpu_speed_mhz);

/// Source of machine attributes, reachability, and process listings.
/// Attribute reads may throw ProbeError.
class ProbeProvider {
 public:
  virtual ~ProbeProvider() = default;

  virtual std::string os_type() = 0;
  virtual double cpu_speed_mhz() = 0;
  virtual int num_cpus() = 0;
  virtual double workload() = 0;
  virtual std::int64_t free_ram_bytes() = 0;
  virtual std::int64_t free_swap_bytes() = 0;

  /// One reachability attempt.
  virtual bool ping(int machine_rank, double timeout_ms) = 0;
  /// Live process ids on a machine; nullopt when the listing failed.
  virtual std::optional<std::set<std::int64_t>> list_pids(int machine_rank) = 0;
  virtual void pause_ms(double) {}
};

struct PingPolicy {
  double timeout_ms = 1000.0;
  int attempts = 2;
  double gap_ms = 250.0;
};

/// Up iff one of `policy.attempts` consecutive pings answers.
MachState machine_state(ProbeProvider& provider, int machine_rank, const PingPolicy& policy = {});

/// Full attribute record for `machine_rank`. When the machine is down or the
/// provider fails, the statics of `previous` are kept and the state is down.
MachineAttributes probe_machine(ProbeProvider& provider, int machine_rank, const MachineAttributes& previous = {},
                                const PingPolicy& policy = {});

/// init/completed/dead come back unchanged. A running task is dead when its
/// machine is down or its pid is missing from the machine's process list.
TaskPhase task_state(ProbeProvider& provider, const TaskState& recorded, int machine_rank,
                     const PingPolicy& policy = {});

/// Provider whose ping and remote process listings travel over the QoS wire
/// protocol (PING / LIST_PIDS). Subclasses supply the local readings.
class WireProbeProvider : public ProbeProvider {
 public:
  WireProbeProvider(int own_rank, Transport& transport, Executor& executor);

  bool ping(int machine_rank, double timeout_ms) override;
  std::optional<std::set<std::int64_t>> list_pids(int machine_rank) override;
  void pause_ms(double ms) override;

  /// Process ids alive on this machine.
  virtual std::set<std::int64_t> local_pids() = 0;

 protected:
  int own_rank_;
  Transport& transport_;
  Executor& executor_;
};

/// Set of task thread ids registered on this host.
class PidRegistry {
 public:
  void add(std::int64_t pid);
  void remove(std::int64_t pid);
  std::set<std::int64_t> all() const;

 private:
  mutable std::mutex mu_;
  std::set<std::int64_t> pids_;
};

/// Reads the host operating system: load average, /proc/cpuinfo,
/// /proc/meminfo. Task liveness is the presence of the task's thread under
/// /proc/self/task.
class OsProbeProvider final : public WireProbeProvider {
 public:
  OsProbeProvider(int own_rank, Transport& transport, Executor& executor, const PidRegistry& registry);

  std::string os_type() override;
  double cpu_speed_mhz() override;
  int num_cpus() override;
  double workload() override;
  std::int64_t free_ram_bytes() override;
  std::int64_t free_swap_bytes() override;
  std::set<std::int64_t> local_pids() override;

 private:
  const PidRegistry& registry_;
};

// ---------------------------------------------------------------------------
// Scripted loads for simulated machines.

/// Workload of one machine over virtual time.
class LoadSchedule {
 public:
  static LoadSchedule idle();
  static LoadSchedule fixed(double workload);
  /// `peak` for half_period_ms, then 0 for half_period_ms, repeating; shifted
  /// by `phase_ms`.
  static LoadSchedule oscillate(double peak, double half_period_ms, double phase_ms = 0.0);
  /// Piecewise constant: value of the latest step at or before t, 0 before
  /// the first step. Step times must be strictly increasing.
  static LoadSchedule steps(std::vector<std::pair<double, double>> steps);

  double at(double t_ms) const;
  /// Earliest time strictly after `t_ms` at which the value may change.
  std::optional<double> next_change_after(double t_ms) const;

  enum class Kind { fixed, oscillate, steps };
  Kind kind() const { return kind_; }

 private:
  Kind kind_ = Kind::fixed;
  double value_ = 0.0;
  double half_period_ms_ = 0.0;
  double phase_ms_ = 0.0;
  std::vector<std::pair<double, double>> steps_;
};

/// Per-machine load schedules keyed by machine name.
struct LoadScenario {
  std::map<std::string, LoadSchedule> loads;

  LoadSchedule for_machine(const std::string& name) const;
};

/// Lines: `load <machine> static <k>`, `load <machine> oscillate <peak>
/// <half_period_ms> [phase_ms]`, `load <machine> at <t_ms> <value>`.
LoadScenario parse_scenario(std::string_view text);
LoadScenario load_scenario_file(const std::string& path);

}  // namespace qosmw
