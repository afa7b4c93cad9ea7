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

#include "qosmw/qos_store.hpp"

#include "qosmw/netmeter.hpp"

namespace qosmw {

LocalQosStore::LocalQosStore(AtgPtr atg, int machine_rank) : atg_(std::move(atg)), machine_rank_(machine_rank) {
  atg_->machine(machine_rank);
  scope_ = peer_machine_set(*atg_, machine_rank);
  scope_.insert(machine_rank);
  for (int m : scope_) {
    for (int t : atg_->tasks_on(m)) scope_tasks_.insert(t);
  }
  for (int l : atg_->links_touching(machine_rank)) scope_links_.insert(l);
  owned_links_ = designated_links(*atg_, machine_rank);
}

void LocalQosStore::check_machine(int rank) const {
  if (!scope_.count(rank)) throw QosError("unknown rank " + std::to_string(rank));
}

void LocalQosStore::write_machine_attrs(int rank, const MachineAttributes& attrs) {
  check_machine(rank);
  std::lock_guard lk(mu_);
  state_.machines[rank] = attrs;
}

void LocalQosStore::apply_task_state(int task_rank, const TaskState& s) {
  const TaskState cur = state_.task_or_default(task_rank);
  if (!legal_transition(cur.phase, s.phase)) {
    throw QosError("illegal task state transition " + std::string(to_string(cur.phase)) + " -> " +
                   std::string(to_string(s.phase)));
  }
  state_.tasks[task_rank] = s;
}

void LocalQosStore::write_task_state(int task_rank, const TaskState& s) {
  if (!scope_tasks_.count(task_rank)) throw QosError("unknown task " + std::to_string(task_rank));
  std::lock_guard lk(mu_);
  apply_task_state(task_rank, s);
}

void LocalQosStore::write_link_attrs(int link_id, const LinkAttributes& attrs) {
  if (!scope_links_.count(link_id)) throw QosError("unknown link " + std::to_string(link_id));
  std::lock_guard lk(mu_);
  state_.links[link_id] = attrs;
}

void LocalQosStore::apply_peer_report(const MachineReport& r) {
  if (r.machine_rank == machine_rank_ || !scope_.count(r.machine_rank)) return;
  state_.machines[r.machine_rank] = r.attrs;
  for (const auto& [t, s] : r.tasks) {
    if (!scope_tasks_.count(t)) continue;
    if (state_.task_or_default(t).terminal()) continue;
    state_.tasks[t] = s;
  }
  for (const auto& [l, a] : r.links) {
    if (!scope_links_.count(l)) continue;
    auto it = state_.links.find(l);
    if (it == state_.links.end() || a.last_measured_stamp >= it->second.last_measured_stamp) state_.links[l] = a;
  }
}

void LocalQosStore::apply_peer_down(int rank) {
  if (rank == machine_rank_ || !scope_.count(rank)) return;
  state_.machines[rank] = state_.machine_or_default(rank);
  state_.machines[rank].mach_state = MachState::down;
  for (int t : atg_->tasks_on(rank)) {
    auto s = state_.task_or_default(t);
    if (s.phase == TaskPhase::running) state_.tasks[t] = {TaskPhase::dead, s.pid};
  }
}

void LocalQosStore::merge_peer_report(const MachineReport& r) {
  check_machine(r.machine_rank);
  std::lock_guard lk(mu_);
  apply_peer_report(r);
}

void LocalQosStore::mark_peer_down(int rank) {
  check_machine(rank);
  std::lock_guard lk(mu_);
  apply_peer_down(rank);
}

std::int64_t LocalQosStore::commit_cycle(const CycleUpdate& u) {
  std::lock_guard lk(mu_);
  state_.machines[machine_rank_] = u.own_attrs;
  for (const auto& [t, pid] : u.local_deaths) {
    auto s = state_.task_or_default(t);
    if (s.phase == TaskPhase::running && s.pid == pid) state_.tasks[t] = {TaskPhase::dead, pid};
  }
  for (const auto& [l, a] : u.measured_links) {
    if (scope_links_.count(l)) state_.links[l] = a;
  }
  for (const auto& r : u.peer_reports) apply_peer_report(r);
  for (int r : u.peers_down) apply_peer_down(r);
  return ++stamp_;
}

std::int64_t LocalQosStore::bump_stamp() {
  std::lock_guard lk(mu_);
  return ++stamp_;
}

std::int64_t LocalQosStore::stamp() const {
  std::lock_guard lk(mu_);
  return stamp_;
}

TaskView LocalQosStore::snapshot_task_view(int task_rank) const {
  if (task_rank < 0 || task_rank >= atg_->num_tasks() || atg_->machine_of(task_rank) != machine_rank_) {
    throw QosError("task " + std::to_string(task_rank) + " is not local");
  }
  std::lock_guard lk(mu_);
  return build_task_view(*atg_, state_, task_rank, stamp_);
}

MachView LocalQosStore::snapshot_mach_view() const {
  std::lock_guard lk(mu_);
  return build_mach_view(*atg_, state_, machine_rank_, stamp_);
}

MachineAttributes LocalQosStore::machine_attrs(int rank) const {
  check_machine(rank);
  std::lock_guard lk(mu_);
  return state_.machine_or_default(rank);
}

TaskState LocalQosStore::task_state(int task_rank) const {
  if (!scope_tasks_.count(task_rank)) throw QosError("unknown task " + std::to_string(task_rank));
  std::lock_guard lk(mu_);
  return state_.task_or_default(task_rank);
}

LinkAttributes LocalQosStore::link_attrs(int link_id) const {
  if (!scope_links_.count(link_id)) throw QosError("unknown link " + std::to_string(link_id));
  std::lock_guard lk(mu_);
  return state_.link_or_default(link_id);
}

MachineReport LocalQosStore::own_report() const {
  std::lock_guard lk(mu_);
  MachineReport r;
  r.machine_rank = machine_rank_;
  r.stamp = stamp_;
  r.attrs = state_.machine_or_default(machine_rank_);
  for (int t : atg_->tasks_on(machine_rank_)) r.tasks[t] = state_.task_or_default(t);
  for (int l : owned_links_) r.links[l] = state_.link_or_default(l);
  return r;
}

// ---------------------------------------------------------------------------

GlobalQosStore::GlobalQosStore(AtgPtr atg) : atg_(std::move(atg)) {
  view_ = build_app_view(*atg_, ClusterState{}, 0);
}

std::int64_t GlobalQosStore::commit(std::vector<MachineReport> reports) {
  auto state = to_cluster_state(reports);
  std::lock_guard lk(mu_);
  const std::int64_t next = view_.stamp + 1;
  view_ = build_app_view(*atg_, state, next);
  reports_ = std::move(reports);
  return next;
}

AppView GlobalQosStore::snapshot_app_view() const {
  std::lock_guard lk(mu_);
  return view_;
}

std::int64_t GlobalQosStore::stamp() const {
  std::lock_guard lk(mu_);
  return view_.stamp;
}

std::vector<MachineReport> GlobalQosStore::reports() const {
  std::lock_guard lk(mu_);
  return reports_;
}

std::map<int, TaskState> GlobalQosStore::task_states() const {
  std::lock_guard lk(mu_);
  std::map<int, TaskState> out;
  for (const auto& r : reports_) out.insert(r.tasks.begin(), r.tasks.end());
  return out;
}

ClusterState to_cluster_state(const std::vector<MachineReport>& reports) {
  ClusterState s;
  for (const auto& r : reports) {
    s.machines[r.machine_rank] = r.attrs;
    s.tasks.insert(r.tasks.begin(), r.tasks.end());
    s.links.insert(r.links.begin(), r.links.end());
  }
  return s;
}

}  // namespace qosmw
