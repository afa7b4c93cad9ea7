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
#include <optional>
#include <string>
#include <string_view>

namespace qosmw {

enum class MachState { up, down };

/// Static and dynamic attributes of one machine. Defaults are the values a
/// store reports before its first monitoring cycle.
struct MachineAttributes {
  std::string os_type = "unknown";
  double cpu_speed_mhz = 1.0;  // slowest CPU on the machine
  int num_cpus = 1;
  double workload = 0.0;  // average run-queue length, running processes included
  double effective_speed_mhz = 1.0;
  std::int64_t free_ram_bytes = 0;
  std::int64_t free_swap_bytes = 0;
  MachState mach_state = MachState::up;

  friend bool operator==(const MachineAttributes&, const MachineAttributes&) = default;
};

enum class TaskPhase { init, running, completed, dead };

struct TaskState {
  TaskPhase phase = TaskPhase::init;
  std::int64_t pid = 0;  // meaningful once running

  bool terminal() const { return phase == TaskPhase::completed || phase == TaskPhase::dead; }
  friend bool operator==(const TaskState&, const TaskState&) = default;
};

/// init->running, running->completed, running->dead. Rewriting the same phase
/// is accepted as a no-op transition.
bool legal_transition(TaskPhase from, TaskPhase to);

struct LinkAttributes {
  double latency_ms = 0.0;
  double throughput_mbps = 0.0;
  std::int64_t last_measured_stamp = 0;
  bool stale = false;

  friend bool operator==(const LinkAttributes&, const LinkAttributes&) = default;
};

enum class ResourceAttribute {
  OSTYPE,
  CPUSPEED,
  NUMOFCPUS,
  WORKLOAD,
  EFFECTIVESPEED,
  FREERAMSIZE,
  FREESWAPSIZE,
  MACHSTATE,
  TASKSTATE,
  LINKLATENCY,
  LINKTHROUGHPUT,
};

inline constexpr ResourceAttribute kAllResourceAttributes[] = {
    ResourceAttribute::OSTYPE,         ResourceAttribute::CPUSPEED,     ResourceAttribute::NUMOFCPUS,
    ResourceAttribute::WORKLOAD,       ResourceAttribute::EFFECTIVESPEED, ResourceAttribute::FREERAMSIZE,
    ResourceAttribute::FREESWAPSIZE,   ResourceAttribute::MACHSTATE,    ResourceAttribute::TASKSTATE,
    ResourceAttribute::LINKLATENCY,    ResourceAttribute::LINKTHROUGHPUT,
};

bool is_machine_attribute(ResourceAttribute a);
bool is_link_attribute(ResourceAttribute a);

std::string_view to_string(ResourceAttribute a);
std::optional<ResourceAttribute> resource_attribute_from_string(std::string_view s);

std::string_view to_string(MachState s);
std::string_view to_string(TaskPhase p);
std::optional<MachState> mach_state_from_string(std::string_view s);
std::optional<TaskPhase> task_phase_from_string(std::string_view s);

/// Numeric TASKSTATE codes returned through the QoS API: running=1, init=0,
/// completed=2, dead=-1.
int task_state_code(TaskPhase p);

/// up=1, down=0.
int mach_state_code(MachState s);

}  // namespace qosmw
