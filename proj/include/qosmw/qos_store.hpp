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
#include <mutex>
#include <set>
#include <vector>

#include "qosmw/atg.hpp"
#include "qosmw/views.hpp"

namespace qosmw {

/// Everything one monitoring cycle writes, applied under a single lock
/// together with the stamp increment.
struct CycleUpdate {
  MachineAttributes own_attrs;
  /// Local tasks found dead, with the pid they were running under. Applied
  /// only if the task is still recorded running with that pid.
  std::map<int, std::int64_t> local_deaths;
  std::map<int, LinkAttributes> measured_links;
  std::vector<MachineReport> peer_reports;
  std::set<int> peers_down;
};

/// Per-machine store: this machine's attributes, cached records of its peer
/// machines, local task states, and link attributes. All reads return copies.
class LocalQosStore {
 public:
  LocalQosStore(AtgPtr atg, int machine_rank);

  int machine_rank() const { return machine_rank_; }
  const Atg& atg() const { return *atg_; }
  const std::set<int>& scope() const { return scope_; }

  /// Replaces the whole record. Throws QosError for a rank outside
  /// {this machine} + peer machines.
  void write_machine_attrs(int rank, const MachineAttributes& attrs);

  /// Authoritative write for a task in scope; rejects illegal transitions.
  void write_task_state(int task_rank, const TaskState& state);

  void write_link_attrs(int link_id, const LinkAttributes& attrs);

  /// Mirror a peer's published report. Terminal task states already cached
  /// stay terminal; link records only move forward in stamp.
  void merge_peer_report(const MachineReport& report);

  /// Peer unreachable: machine down and its running tasks dead.
  void mark_peer_down(int rank);

  /// Applies `u` and bumps the stamp atomically. Returns the new stamp.
  std::int64_t commit_cycle(const CycleUpdate& u);

  std::int64_t bump_stamp();
  std::int64_t stamp() const;

  TaskView snapshot_task_view(int task_rank) const;
  MachView snapshot_mach_view() const;
  MachineAttributes machine_attrs(int rank) const;
  TaskState task_state(int task_rank) const;
  LinkAttributes link_attrs(int link_id) const;

  /// Record served to peers: own attributes, hosted tasks, designated links.
  MachineReport own_report() const;

 private:
  void check_machine(int rank) const;
  void apply_task_state(int task_rank, const TaskState& state);
  void apply_peer_report(const MachineReport& report);
  void apply_peer_down(int rank);

  AtgPtr atg_;
  int machine_rank_;
  std::set<int> scope_;
  std::set<int> scope_tasks_;
  std::set<int> scope_links_;
  std::vector<int> owned_links_;

  mutable std::mutex mu_;
  ClusterState state_;
  std::int64_t stamp_ = 0;
};

/// Master-only store holding the latest assembled application snapshot.
class GlobalQosStore {
 public:
  explicit GlobalQosStore(AtgPtr atg);

  /// Installs a fully assembled cycle and bumps the global stamp.
  std::int64_t commit(std::vector<MachineReport> reports);

  AppView snapshot_app_view() const;
  std::int64_t stamp() const;
  std::vector<MachineReport> reports() const;
  std::map<int, TaskState> task_states() const;

 private:
  AtgPtr atg_;
  mutable std::mutex mu_;
  std::vector<MachineReport> reports_;
  AppView view_;
};

ClusterState to_cluster_state(const std::vector<MachineReport>& reports);

}  // namespace qosmw
