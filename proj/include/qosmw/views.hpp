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
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "qosmw/atg.hpp"
#include "qosmw/attributes.hpp"

namespace qosmw {

/// Errors surfaced through the QoS API (bad scope, bad port index, ...).
class QosError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A stored attribute: numbers and state codes as double, OSTYPE as text.
using AttributeValue = std::variant<double, std::string>;

double as_number(const AttributeValue& v);

/// Everything a task sees through one of its ports: the link, the peer
/// machine, the peer task, and the peer port.
struct PortView {
  int port_index = 0;
  int link_id = 0;
  LinkAttributes link;
  int peer_machine_rank = 0;
  std::string peer_machine_name;
  MachineAttributes peer_machine;
  int peer_task_rank = 0;
  std::string peer_task_name;
  TaskState peer_task;
  int peer_port_index = 0;

  /// TASKSTATE only.
  AttributeValue peer_task_attribute(ResourceAttribute attr) const;
  /// Any machine attribute (OSTYPE ... MACHSTATE).
  AttributeValue peer_mach_attribute(ResourceAttribute attr) const;
  /// LINKLATENCY or LINKTHROUGHPUT.
  AttributeValue link_attribute(ResourceAttribute attr) const;
};

struct TaskView {
  int rank = 0;
  std::string variable_name;
  std::string component_id;
  int machine_rank = 0;
  TaskState state;
  std::vector<PortView> ports;
  std::int64_t stamp = 0;

  AttributeValue attribute(ResourceAttribute attr) const;
};

struct MachView {
  int rank = 0;
  std::string name;
  MachineAttributes attrs;
  std::vector<TaskView> tasks;
  std::int64_t stamp = 0;

  AttributeValue attribute(ResourceAttribute attr) const;
};

struct AppView {
  std::int64_t stamp = 0;
  std::vector<MachView> machines;
};

AttributeValue machine_attribute(const MachineAttributes& m, ResourceAttribute attr);

/// Latest known record of every entity, keyed by rank / link id. Entries
/// that are absent read as defaults.
struct ClusterState {
  std::map<int, MachineAttributes> machines;
  std::map<int, TaskState> tasks;
  std::map<int, LinkAttributes> links;

  MachineAttributes machine_or_default(int rank) const;
  TaskState task_or_default(int rank) const;
  LinkAttributes link_or_default(int link_id) const;
};

/// What one QoS manager publishes about its own machine: its attributes, the
/// states of the tasks it hosts, and the links it measures.
struct MachineReport {
  int machine_rank = 0;
  std::int64_t stamp = 0;
  MachineAttributes attrs;
  std::map<int, TaskState> tasks;
  std::map<int, LinkAttributes> links;

  friend bool operator==(const MachineReport&, const MachineReport&) = default;
};

TaskView build_task_view(const Atg& atg, const ClusterState& state, int task_rank, std::int64_t stamp);
MachView build_mach_view(const Atg& atg, const ClusterState& state, int machine_rank, std::int64_t stamp);
AppView build_app_view(const Atg& atg, const ClusterState& state, std::int64_t stamp);

/// Human-readable dumps used by the CLI and by the anonymity checks.
std::string to_text(const PortView& v);
std::string to_text(const TaskView& v);
std::string to_text(const MachView& v);
std::string to_text(const AppView& v);

}  // namespace qosmw
