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

#include "qosmw/attributes.hpp"

#include <array>
#include <utility>

namespace qosmw {

bool legal_transition(TaskPhase from, TaskPhase to) {
  if (from == to) return true;
  switch (from) {
    case TaskPhase::init:
      return to == TaskPhase::running;
    case TaskPhase::running:
      return to == TaskPhase::completed || to == TaskPhase::dead;
    case TaskPhase::completed:
    case TaskPhase::dead:
      return false;
  }
  return false;
}

bool is_machine_attribute(ResourceAttribute a) {
  switch (a) {
    case ResourceAttribute::OSTYPE:
    case ResourceAttribute::CPUSPEED:
    case ResourceAttribute::NUMOFCPUS:
    case ResourceAttribute::WORKLOAD:
    case ResourceAttribute::EFFECTIVESPEED:
    case ResourceAttribute::FREERAMSIZE:
    case ResourceAttribute::FREESWAPSIZE:
    case ResourceAttribute::MACHSTATE:
      return true;
    default:
      return false;
  }
}

bool is_link_attribute(ResourceAttribute a) {
  return a == ResourceAttribute::LINKLATENCY || a == ResourceAttribute::LINKTHROUGHPUT;
}

namespace {
constexpr std::array<std::pair<ResourceAttribute, std::string_view>, 11> kNames{{
    {ResourceAttribute::OSTYPE, "OSTYPE"},
    {ResourceAttribute::CPUSPEED, "CPUSPEED"},
    {ResourceAttribute::NUMOFCPUS, "NUMOFCPUS"},
    {ResourceAttribute::WORKLOAD, "WORKLOAD"},
    {ResourceAttribute::EFFECTIVESPEED, "EFFECTIVESPEED"},
    {ResourceAttribute::FREERAMSIZE, "FREERAMSIZE"},
    {ResourceAttribute::FREESWAPSIZE, "FREESWAPSIZE"},
    {ResourceAttribute::MACHSTATE, "MACHSTATE"},
    {ResourceAttribute::TASKSTATE, "TASKSTATE"},
    {ResourceAttribute::LINKLATENCY, "LINKLATENCY"},
    {ResourceAttribute::LINKTHROUGHPUT, "LINKTHROUGHPUT"},
}};
}  // namespace

std::string_view to_string(ResourceAttribute a) {
  for (const auto& [attr, name] : kNames) {
    if (attr == a) return name;
  }
  return "?";
}

std::optional<ResourceAttribute> resource_attribute_from_string(std::string_view s) {
  for (const auto& [attr, name] : kNames) {
    if (name == s) return attr;
  }
  return std::nullopt;
}

std::string_view to_string(MachState s) { return s == MachState::up ? "up" : "down"; }

std::string_view to_string(TaskPhase p) {
  switch (p) {
    case TaskPhase::init:
      return "init";
    case TaskPhase::running:
      return "running";
    case TaskPhase::completed:
      return "completed";
    case TaskPhase::dead:
      return "dead";
  }
  return "?";
}

std::optional<MachState> mach_state_from_string(std::string_view s) {
  if (s == "up") return MachState::up;
  if (s == "down") return MachState::down;
  return std::nullopt;
}

std::optional<TaskPhase> task_phase_from_string(std::string_view s) {
  for (TaskPhase p : {TaskPhase::init, TaskPhase::running, TaskPhase::completed, TaskPhase::dead}) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

int task_state_code(TaskPhase p) {
  switch (p) {
    case TaskPhase::init:
      return 0;
    case TaskPhase::running:
      return 1;
    case TaskPhase::completed:
      return 2;
    case TaskPhase::dead:
      return -1;
  }
  return 0;
}

int mach_state_code(MachState s) { return s == MachState::up ? 1 : 0; }

}  // namespace qosmw
