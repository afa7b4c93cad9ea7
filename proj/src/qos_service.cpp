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

#include "qosmw/qos_service.hpp"

#include <algorithm>
#include <numeric>

namespace qosmw {

QosService::QosService(QosManager& local, int task_rank) : mgr_(local), task_rank_(task_rank) {
  if (task_rank < 0 || task_rank >= mgr_.atg().num_tasks() || mgr_.atg().machine_of(task_rank) != mgr_.machine_rank()) {
    throw QosError("task " + std::to_string(task_rank) + " is not hosted on this machine");
  }
}

AppView QosService::get_app_view() {
  if (auto* g = mgr_.global()) return g->snapshot_app_view();
  const auto local_stamp = mgr_.local().stamp();
  if (cached_app_ && cached_at_local_stamp_ == local_stamp) return *cached_app_;
  const auto& atg = mgr_.atg();
  auto reply = mgr_.transport().request(mgr_.machine_rank(), atg.master_rank(), Frame{opcode::kGetAppView, {}},
                                        mgr_.ping_policy().timeout_ms);
  if (!reply || reply->opcode != opcode::kGetAppView) throw QosError("global view unavailable");
  try {
    auto [stamp, reports] = decode_app_payload(to_string(reply->payload));
    cached_app_ = build_app_view(atg, to_cluster_state(reports), stamp);
  } catch (const WireError&) {
    throw QosError("global view unavailable");
  }
  cached_at_local_stamp_ = local_stamp;
  return *cached_app_;
}

MachView QosService::get_mach_view() const { return mgr_.local().snapshot_mach_view(); }

TaskView QosService::get_task_view() const { return mgr_.local().snapshot_task_view(task_rank_); }

PortView QosService::get_port_view(int port_index) const {
  auto tv = get_task_view();
  if (port_index < 0 || port_index >= static_cast<int>(tv.ports.size())) {
    throw QosError("bad port index " + std::to_string(port_index));
  }
  return tv.ports[static_cast<std::size_t>(port_index)];
}

AttributeValue QosService::get_attribute(const PortView& view, ResourceAttribute attr, AttrScope scope,
                                         bool force_fresh) const {
  switch (scope) {
    case AttrScope::self:
      return view.link_attribute(attr);
    case AttrScope::peer_task:
      return view.peer_task_attribute(attr);
    case AttrScope::peer_mach:
      if (attr == ResourceAttribute::MACHSTATE && force_fresh) {
        return static_cast<double>(
            mach_state_code(machine_state(mgr_.provider(), view.peer_machine_rank, mgr_.ping_policy())));
      }
      return view.peer_mach_attribute(attr);
  }
  throw QosError("bad scope");
}

AttributeValue QosService::get_attribute(const TaskView& view, ResourceAttribute attr, AttrScope scope) const {
  if (scope != AttrScope::self) throw QosError("a TaskView has no peer scope; use its PortViews");
  return view.attribute(attr);
}

AttributeValue QosService::get_attribute(const MachView& view, ResourceAttribute attr, AttrScope scope,
                                         bool force_fresh) const {
  if (scope != AttrScope::self) throw QosError("a MachView has no peer scope");
  if (attr == ResourceAttribute::MACHSTATE && force_fresh) {
    return static_cast<double>(mach_state_code(machine_state(mgr_.provider(), view.rank, mgr_.ping_policy())));
  }
  return view.attribute(attr);
}

int QosService::peer_task_state(int port_index) const {
  return static_cast<int>(as_number(get_port_view(port_index).peer_task_attribute(ResourceAttribute::TASKSTATE)));
}

double QosService::peer_mach_value(int port_index, ResourceAttribute attr, bool force_fresh) const {
  return as_number(get_attribute(get_port_view(port_index), attr, AttrScope::peer_mach, force_fresh));
}

double QosService::port_value(const PortView& p, ResourceAttribute attr) const {
  if (attr == ResourceAttribute::OSTYPE || attr == ResourceAttribute::TASKSTATE) {
    throw QosError("attribute " + std::string(to_string(attr)) + " cannot rank ports");
  }
  if (is_link_attribute(attr)) return as_number(p.link_attribute(attr));
  return as_number(p.peer_mach_attribute(attr));
}

int QosService::best_port_index(ResourceAttribute attr, Direction direction) const {
  const auto tv = get_task_view();
  int best = -1;
  double best_value = 0.0;
  for (const auto& p : tv.ports) {
    const double v = port_value(p, attr);
    if (p.peer_machine.mach_state == MachState::down) continue;
    const bool better = direction == Direction::max ? v > best_value : v < best_value;
    if (best < 0 || better) {
      best = p.port_index;
      best_value = v;
    }
  }
  if (best < 0) throw QosError("no eligible port");
  return best;
}

std::vector<int> QosService::sort_port_views(ResourceAttribute attr, Order order) const {
  const auto tv = get_task_view();
  std::vector<double> value(tv.ports.size());
  std::vector<bool> down(tv.ports.size());
  for (std::size_t i = 0; i < tv.ports.size(); ++i) {
    value[i] = port_value(tv.ports[i], attr);
    down[i] = tv.ports[i].peer_machine.mach_state == MachState::down;
  }
  std::vector<int> idx(tv.ports.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (down[a] != down[b]) return !down[a];
    return order == Order::ascending ? value[a] < value[b] : value[a] > value[b];
  });
  return idx;
}

std::int64_t QosService::get_meas_stamp() const { return mgr_.local().stamp(); }

std::string QosService::get_task_name() const { return mgr_.atg().task(task_rank_).variable_name; }

int QosService::get_mach_rank() const { return mgr_.machine_rank(); }

int QosService::num_tasks() const { return mgr_.atg().num_tasks(); }

int QosService::num_machines() const { return mgr_.atg().num_machines(); }

int QosService::num_ports() const { return mgr_.atg().task(task_rank_).num_ports; }

void QosService::stop_monitoring() { mgr_.stop(); }

void QosService::resume_monitoring() { mgr_.resume(); }

void QosService::set_monitoring_period(double period_ms) { mgr_.set_period(period_ms); }

void QosService::report_running(std::int64_t pid) {
  mgr_.local().write_task_state(task_rank_, TaskState{TaskPhase::running, pid});
  mgr_.executor().notify_all();
}

void QosService::report_completed() {
  const auto cur = mgr_.local().task_state(task_rank_);
  mgr_.local().write_task_state(task_rank_, TaskState{TaskPhase::completed, cur.pid});
  mgr_.executor().notify_all();
}

}  // namespace qosmw
