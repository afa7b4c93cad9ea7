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
#include <vector>

#include "qosmw/qos_manager.hpp"
#include "qosmw/views.hpp"

namespace qosmw {

enum class AttrScope { self, peer_task, peer_mach };
enum class Direction { max, min };
enum class Order { ascending, descending };

/// The QoS API a task holds. Identification is by rank, port index, and
/// variable name only. Message passing is not available here.
class QosService {
 public:
  QosService(QosManager& local, int task_rank);

  AppView get_app_view();
  MachView get_mach_view() const;
  TaskView get_task_view() const;
  PortView get_port_view(int port_index) const;

  /// On a PortView: self = the link, peer_task = TASKSTATE, peer_mach = any
  /// machine attribute. `force_fresh` with MACHSTATE pings the machine now
  /// instead of reading the stored state.
  AttributeValue get_attribute(const PortView& view, ResourceAttribute attr, AttrScope scope,
                               bool force_fresh = false) const;
  /// On a TaskView only self/TASKSTATE is meaningful.
  AttributeValue get_attribute(const TaskView& view, ResourceAttribute attr, AttrScope scope = AttrScope::self) const;
  AttributeValue get_attribute(const MachView& view, ResourceAttribute attr, AttrScope scope = AttrScope::self,
                               bool force_fresh = false) const;

  /// Shorthands over the current PortView of `port_index`.
  int peer_task_state(int port_index) const;
  double peer_mach_value(int port_index, ResourceAttribute attr, bool force_fresh = false) const;

  /// Port whose peer machine or link has the extreme value; ties go to the
  /// lowest index and ports to a down machine are skipped.
  int best_port_index(ResourceAttribute attr, Direction direction) const;
  /// Stable ordering of port indices; ports to a down machine come last.
  std::vector<int> sort_port_views(ResourceAttribute attr, Order order) const;

  std::int64_t get_meas_stamp() const;
  int get_task_rank() const { return task_rank_; }
  std::string get_task_name() const;
  int get_mach_rank() const;
  int num_tasks() const;
  int num_machines() const;
  int num_ports() const;

  void stop_monitoring();
  void resume_monitoring();
  void set_monitoring_period(double period_ms);

  /// Lifecycle reports for the owning task.
  void report_running(std::int64_t pid);
  void report_completed();

 private:
  double port_value(const PortView& p, ResourceAttribute attr) const;

  QosManager& mgr_;
  int task_rank_;
  std::optional<AppView> cached_app_;
  std::int64_t cached_at_local_stamp_ = -1;
};

}  // namespace qosmw
