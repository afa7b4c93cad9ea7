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

#include "qosmw/views.hpp"

#include <sstream>

namespace qosmw {

double as_number(const AttributeValue& v) {
  if (const double* d = std::get_if<double>(&v)) return *d;
  throw QosError("attribute is not numeric");
}

AttributeValue machine_attribute(const MachineAttributes& m, ResourceAttribute attr) {
  switch (attr) {
    case ResourceAttribute::OSTYPE:
      return m.os_type;
    case ResourceAttribute::CPUSPEED:
      return m.cpu_speed_mhz;
    case ResourceAttribute::NUMOFCPUS:
      return static_cast<double>(m.num_cpus);
    case ResourceAttribute::WORKLOAD:
      return m.workload;
    case ResourceAttribute::EFFECTIVESPEED:
      return m.effective_speed_mhz;
    case ResourceAttribute::FREERAMSIZE:
      return static_cast<double>(m.free_ram_bytes);
    case ResourceAttribute::FREESWAPSIZE:
      return static_cast<double>(m.free_swap_bytes);
    case ResourceAttribute::MACHSTATE:
      return static_cast<double>(mach_state_code(m.mach_state));
    default:
      throw QosError(std::string(to_string(attr)) + " is not a machine attribute");
  }
}

AttributeValue PortView::peer_task_attribute(ResourceAttribute attr) const {
  if (attr != ResourceAttribute::TASKSTATE) {
    throw QosError(std::string(to_string(attr)) + " is not a task attribute");
  }
  return static_cast<double>(task_state_code(peer_task.phase));
}

AttributeValue PortView::peer_mach_attribute(ResourceAttribute attr) const {
  return machine_attribute(peer_machine, attr);
}

AttributeValue PortView::link_attribute(ResourceAttribute attr) const {
  switch (attr) {
    case ResourceAttribute::LINKLATENCY:
      return link.latency_ms;
    case ResourceAttribute::LINKTHROUGHPUT:
      return link.throughput_mbps;
    default:
      throw QosError(std::string(to_string(attr)) + " is not a link attribute");
  }
}

AttributeValue TaskView::attribute(ResourceAttribute attr) const {
  if (attr != ResourceAttribute::TASKSTATE) {
    throw QosError(std::string(to_string(attr)) + " is not a task attribute");
  }
  return static_cast<double>(task_state_code(state.phase));
}

AttributeValue MachView::attribute(ResourceAttribute attr) const { return machine_attribute(attrs, attr); }

MachineAttributes ClusterState::machine_or_default(int rank) const {
  auto it = machines.find(rank);
  return it == machines.end() ? MachineAttributes{} : it->second;
}

TaskState ClusterState::task_or_default(int rank) const {
  auto it = tasks.find(rank);
  return it == tasks.end() ? TaskState{} : it->second;
}

LinkAttributes ClusterState::link_or_default(int link_id) const {
  auto it = links.find(link_id);
  return it == links.end() ? LinkAttributes{} : it->second;
}

TaskView build_task_view(const Atg& atg, const ClusterState& state, int task_rank, std::int64_t stamp) {
  const TaskDecl& t = atg.task(task_rank);
  TaskView v;
  v.rank = t.rank;
  v.variable_name = t.variable_name;
  v.component_id = t.component_id;
  v.machine_rank = t.machine_rank;
  v.state = state.task_or_default(t.rank);
  v.stamp = stamp;
  v.ports.reserve(t.num_ports);
  for (int p = 0; p < t.num_ports; ++p) {
    const PortPeer peer = atg.port_peer(t.rank, p);
    PortView pv;
    pv.port_index = p;
    pv.link_id = peer.link_id;
    pv.link = state.link_or_default(peer.link_id);
    pv.peer_machine_rank = peer.machine_rank;
    pv.peer_machine_name = atg.machine(peer.machine_rank).name;
    pv.peer_machine = state.machine_or_default(peer.machine_rank);
    pv.peer_task_rank = peer.task_rank;
    pv.peer_task_name = atg.task(peer.task_rank).variable_name;
    pv.peer_task = state.task_or_default(peer.task_rank);
    pv.peer_port_index = peer.port_index;
    v.ports.push_back(std::move(pv));
  }
  return v;
}

MachView build_mach_view(const Atg& atg, const ClusterState& state, int machine_rank, std::int64_t stamp) {
  const MachineDecl& m = atg.machine(machine_rank);
  MachView v;
  v.rank = m.rank;
  v.name = m.name;
  v.attrs = state.machine_or_default(m.rank);
  v.stamp = stamp;
  for (int t : atg.tasks_on(m.rank)) v.tasks.push_back(build_task_view(atg, state, t, stamp));
  return v;
}

AppView build_app_view(const Atg& atg, const ClusterState& state, std::int64_t stamp) {
  AppView v;
  v.stamp = stamp;
  for (const auto& m : atg.machines()) v.machines.push_back(build_mach_view(atg, state, m.rank, stamp));
  return v;
}

namespace {

void dump_machine(std::ostream& os, const MachineAttributes& m) {
  os << "os=" << m.os_type << " cpu=" << m.cpu_speed_mhz << "MHz x" << m.num_cpus << " workload=" << m.workload
     << " eff=" << m.effective_speed_mhz << "MHz ram=" << m.free_ram_bytes << " swap=" << m.free_swap_bytes
     << " state=" << to_string(m.mach_state);
}

}  // namespace

std::string to_text(const PortView& v) {
  std::ostringstream os;
  os << "port " << v.port_index << " link " << v.link_id << " (lat=" << v.link.latency_ms
     << "ms thr=" << v.link.throughput_mbps << "Mbps" << (v.link.stale ? " stale" : "") << ") -> task "
     << v.peer_task_name << "[" << v.peer_task_rank << "]." << v.peer_port_index << " "
     << to_string(v.peer_task.phase) << " on machine " << v.peer_machine_name << "[" << v.peer_machine_rank
     << "] ";
  dump_machine(os, v.peer_machine);
  return os.str();
}

std::string to_text(const TaskView& v) {
  std::ostringstream os;
  os << "task " << v.variable_name << "[" << v.rank << "] impl=" << v.component_id << " machine=" << v.machine_rank
     << " state=" << to_string(v.state.phase) << " stamp=" << v.stamp << "\n";
  for (const auto& p : v.ports) os << "  " << to_text(p) << "\n";
  return os.str();
}

std::string to_text(const MachView& v) {
  std::ostringstream os;
  os << "machine " << v.name << "[" << v.rank << "] ";
  dump_machine(os, v.attrs);
  os << "\n";
  for (const auto& t : v.tasks) os << to_text(t);
  return os.str();
}

std::string to_text(const AppView& v) {
  std::ostringstream os;
  os << "appview stamp=" << v.stamp << "\n";
  for (const auto& m : v.machines) os << to_text(m);
  return os.str();
}

}  // namespace qosmw
