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
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qosmw {

/// Raised for every malformed or inconsistent task-graph document.
class AtgError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MachineDecl {
  int rank = 0;
  std::string name;
  std::string host;
  std::uint16_t base_port = 0;
  bool is_master = false;
};

struct TaskDecl {
  int rank = 0;
  std::string variable_name;
  int machine_rank = 0;
  int num_ports = 0;
  std::string component_id;
};

struct Endpoint {
  int task_rank = 0;
  int port_index = 0;

  friend bool operator==(const Endpoint&, const Endpoint&) = default;
  friend auto operator<=>(const Endpoint&, const Endpoint&) = default;
};

struct LinkDecl {
  int link_id = 0;
  Endpoint a;
  Endpoint b;
};

/// Opposite end of a link as seen from one port.
struct PortPeer {
  int task_rank = 0;
  int port_index = 0;
  int machine_rank = 0;
  int link_id = 0;

  friend bool operator==(const PortPeer&, const PortPeer&) = default;
};

/// Application Task Graph: machines, tasks, and the point-to-point links
/// between task ports. Immutable once built; every process of an application
/// shares the same instance (or the same document).
class Atg {
 public:
  Atg() = default;

  /// Validates all cross references. Ranks must already be dense and equal to
  /// the vector positions.
  Atg(std::vector<MachineDecl> machines, std::vector<TaskDecl> tasks, std::vector<LinkDecl> links);

  const std::vector<MachineDecl>& machines() const { return machines_; }
  const std::vector<TaskDecl>& tasks() const { return tasks_; }
  const std::vector<LinkDecl>& links() const { return links_; }

  int num_machines() const { return static_cast<int>(machines_.size()); }
  int num_tasks() const { return static_cast<int>(tasks_.size()); }

  const MachineDecl& machine(int rank) const;
  const TaskDecl& task(int rank) const;
  const LinkDecl& link(int link_id) const;

  int master_rank() const { return master_rank_; }
  int machine_of(int task_rank) const { return task(task_rank).machine_rank; }

  /// Tasks mapped to the machine, ascending rank.
  std::vector<int> tasks_on(int machine_rank) const;

  /// Lowest-rank task on the machine, or -1 when the machine hosts none.
  int launcher_task(int machine_rank) const;

  /// Links with at least one endpoint on a task of the given machine.
  std::vector<int> links_touching(int machine_rank) const;

  int find_machine(std::string_view name) const;
  int find_task(std::string_view variable_name) const;

  /// Throws AtgError("port has no peer") for an unconnected port.
  PortPeer port_peer(int task_rank, int port_index) const;
  bool port_connected(int task_rank, int port_index) const;

 private:
  void validate();

  std::vector<MachineDecl> machines_;
  std::vector<TaskDecl> tasks_;
  std::vector<LinkDecl> links_;
  // (task, port) -> link position, -1 when unconnected
  std::vector<std::vector<int>> port_link_;
  int master_rank_ = -1;
};

using AtgPtr = std::shared_ptr<const Atg>;

/// Parses the line-oriented task-graph document:
///
///   machine <name> host=<host> port=<int> [master]
///   task <var_name> machine=<machine_name> ports=<int> impl=<component_id>
///   link <task>.<port_int> <task>.<port_int>
///
/// `#` starts a comment. Ranks and link ids follow declaration order.
Atg parse_atg(std::string_view text);

/// Canonical document for `atg`; parse_atg(serialize_atg(g)) reproduces g.
std::string serialize_atg(const Atg& atg);

Atg load_atg_file(const std::string& path);

/// Machines other than `machine_rank` hosting at least one task linked to a
/// task on `machine_rank`.
std::set<int> peer_machine_set(const Atg& atg, int machine_rank);

/// One master machine hosting a single "manager" task with `workers` ports,
/// plus one machine per worker task. Used when no document is supplied.
Atg make_manager_worker_atg(int workers, std::uint16_t base_port = 17000,
                            const std::string& host = "127.0.0.1");

}  // namespace qosmw
