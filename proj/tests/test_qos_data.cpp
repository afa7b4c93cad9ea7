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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qosmw/qos_store.hpp"
#include "qosmw/views.hpp"
#include "qosmw/wire.hpp"
#include "support.hpp"

using namespace qosmw;
using namespace qosmw::testing;

TEST_CASE("a store reads back what it wrote") {
  const AtgPtr atg = atg_ptr(kStarGraph);
  LocalQosStore store(atg, 0);
  MachineAttributes m;
  m.os_type = "Linux";
  m.cpu_speed_mhz = 333;
  m.workload = 2;
  m.effective_speed_mhz = 111;
  store.write_machine_attrs(1, m);
  CHECK(store.machine_attrs(1) == m);

  store.write_task_state(0, {TaskPhase::running, 77});
  CHECK(store.task_state(0) == TaskState{TaskPhase::running, 77});

  LinkAttributes l{1.5, 80.0, 3, false};
  store.write_link_attrs(0, l);
  CHECK(store.link_attrs(0) == l);
}

TEST_CASE("writes outside the scope are rejected") {
  const AtgPtr atg = atg_ptr(kStarGraph);
  LocalQosStore m2(atg, 1);
  CHECK(m2.scope() == std::set<int>{0, 1});
  CHECK_THROWS_AS(m2.write_machine_attrs(2, {}), QosError);
  CHECK_NOTHROW(m2.write_machine_attrs(0, {}));
}

TEST_CASE("illegal task transitions are rejected") {
  LocalQosStore store(atg_ptr(kStarGraph), 0);
  store.write_task_state(0, {TaskPhase::running, 5});
  store.write_task_state(0, {TaskPhase::completed, 5});
  CHECK_THROWS_AS(store.write_task_state(0, {TaskPhase::running, 5}), QosError);
  CHECK_THROWS_AS(store.write_task_state(1, {TaskPhase::dead, 0}), QosError);
}

TEST_CASE("records default before the first cycle") {
  LocalQosStore store(atg_ptr(kStarGraph), 0);
  CHECK(store.stamp() == 0);
  const MachineAttributes d = store.machine_attrs(2);
  CHECK(d.cpu_speed_mhz == 1.0);
  CHECK(d.effective_speed_mhz == 1.0);
  CHECK(d.mach_state == MachState::up);
  CHECK(store.task_state(3).phase == TaskPhase::init);
  CHECK(store.link_attrs(2).throughput_mbps == 0.0);
}

TEST_CASE("task view of the two-port manager") {
  const AtgPtr atg = atg_ptr(kTwoWorkerGraph);
  LocalQosStore store(atg, 0);
  MachineAttributes w2;
  w2.cpu_speed_mhz = 500;
  w2.effective_speed_mhz = 500;
  store.write_machine_attrs(2, w2);
  store.write_link_attrs(1, {2.0, 50.0, 1, false});

  const TaskView v = store.snapshot_task_view(atg->find_task("Manager"));
  REQUIRE(v.ports.size() == 2);
  CHECK(v.ports[0].peer_task_name == "W1");
  CHECK(v.ports[0].peer_machine_name == "M2");
  CHECK(v.ports[0].link_id == 0);
  CHECK(v.ports[1].peer_task_name == "W2");
  CHECK(v.ports[1].peer_machine.cpu_speed_mhz == 500);
  CHECK(as_number(v.ports[1].link_attribute(ResourceAttribute::LINKTHROUGHPUT)) == 50.0);
  CHECK(as_number(v.ports[1].peer_task_attribute(ResourceAttribute::TASKSTATE)) == 0.0);
  CHECK_THROWS_AS(v.ports[0].peer_task_attribute(ResourceAttribute::WORKLOAD), QosError);
  CHECK_THROWS_AS(v.ports[0].link_attribute(ResourceAttribute::CPUSPEED), QosError);
}

TEST_CASE("a task with no ports has an empty view") {
  const AtgPtr atg = atg_ptr("machine a host=x port=1 master\ntask solo machine=a ports=0 impl=x\n");
  LocalQosStore store(atg, 0);
  CHECK(store.snapshot_task_view(0).ports.empty());
}

TEST_CASE("machine and application views") {
  const AtgPtr atg = atg_ptr(kStarGraph);
  LocalQosStore m2(atg, 1);
  const MachView mv = m2.snapshot_mach_view();
  CHECK(mv.name == "M2");
  CHECK(mv.tasks.size() == 2);

  GlobalQosStore global(atg);
  CHECK(global.stamp() == 0);
  std::vector<MachineReport> reports;
  for (int m = 0; m < 3; ++m) {
    LocalQosStore s(atg, m);
    reports.push_back(s.own_report());
  }
  CHECK(global.commit(reports) == 1);
  const AppView app = global.snapshot_app_view();
  CHECK(app.stamp == 1);
  REQUIRE(app.machines.size() == 3);
  CHECK(app.machines[0].tasks.size() == 1);
  CHECK(app.machines[1].tasks.size() == 2);
  CHECK(app.machines[2].tasks.size() == 1);
}

TEST_CASE("a cycle commit is one stamp step") {
  const AtgPtr atg = atg_ptr(kStarGraph);
  LocalQosStore store(atg, 0);
  store.write_task_state(0, {TaskPhase::running, 9});
  CycleUpdate u;
  u.own_attrs.workload = 3;
  u.local_deaths[0] = 9;
  u.peers_down.insert(2);
  CHECK(store.commit_cycle(u) == 1);
  CHECK(store.stamp() == 1);
  CHECK(store.machine_attrs(0).workload == 3);
  CHECK(store.task_state(0).phase == TaskPhase::dead);
  CHECK(store.machine_attrs(2).mach_state == MachState::down);

  // A death reported against a stale pid is ignored.
  LocalQosStore other(atg, 0);
  other.write_task_state(0, {TaskPhase::running, 10});
  CycleUpdate stale;
  stale.local_deaths[0] = 9;
  other.commit_cycle(stale);
  CHECK(other.task_state(0).phase == TaskPhase::running);
}

TEST_CASE("peer reports cannot revive a terminal task") {
  const AtgPtr atg = atg_ptr(kStarGraph);
  LocalQosStore m1(atg, 0);
  MachineReport r;
  r.machine_rank = 1;
  r.tasks[1] = {TaskPhase::completed, 4};
  m1.merge_peer_report(r);
  CHECK(m1.task_state(1).phase == TaskPhase::completed);
  r.tasks[1] = {TaskPhase::running, 4};
  m1.merge_peer_report(r);
  CHECK(m1.task_state(1).phase == TaskPhase::completed);
}

TEST_CASE("frame codec") {
  const Frame f{opcode::kEchoBulk, Bytes(1000, 0xAB)};
  const Bytes enc = encode_frame(f);
  CHECK(enc.size() == 1005);
  CHECK(get_u32_be(enc, 0) == 1001);
  CHECK(decode_frame(enc) == f);

  FrameDecoder dec;
  Bytes two = encode_frame(Frame{opcode::kPing, {}});
  const Bytes second = encode_frame(Frame{opcode::kToken, to_bytes("x")});
  two.insert(two.end(), second.begin(), second.end());
  dec.feed(std::span(two).first(3));
  CHECK(!dec.next());
  dec.feed(std::span(two).subspan(3));
  CHECK(dec.next()->opcode == opcode::kPing);
  CHECK(dec.next()->opcode == opcode::kToken);
  CHECK(!dec.next());

  Bytes zero_len = {0, 0, 0, 0};
  CHECK_THROWS_AS(decode_frame(zero_len), WireError);
  CHECK(error_message(make_error("boom")) == "boom");
}

TEST_CASE("report payloads round trip") {
  MachineReport r;
  r.machine_rank = 2;
  r.stamp = 14;
  r.attrs.os_type = "Linux";
  r.attrs.cpu_speed_mhz = 333;
  r.attrs.num_cpus = 2;
  r.attrs.workload = 1.5;
  r.attrs.effective_speed_mhz = 266.4;
  r.attrs.free_ram_bytes = 123456789;
  r.attrs.free_swap_bytes = 42;
  r.attrs.mach_state = MachState::down;
  r.tasks[3] = {TaskPhase::running, 4242};
  r.tasks[5] = {TaskPhase::dead, 17};
  r.links[1] = {1.25, 94.5, 13, true};
  CHECK(decode_machine_report(encode_machine_report(r)) == r);

  const auto [stamp, reports] = decode_app_payload(encode_app_payload(9, {r, MachineReport{}}));
  CHECK(stamp == 9);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0] == r);

  const auto [task, st] = decode_task_report(encode_task_report(6, {TaskPhase::completed, 8}));
  CHECK(task == 6);
  CHECK(st == TaskState{TaskPhase::completed, 8});

  CHECK(decode_pids(encode_pids({1, 2, 99999})) == std::set<std::int64_t>{1, 2, 99999});
  CHECK(decode_pids(encode_pids({})).empty());
  CHECK(decode_token(encode_token(12)) == 12);
  CHECK(format_real(1.0 / 3.0) == "0.333333");
}

TEST_CASE("attribute names round trip") {
  for (ResourceAttribute a : kAllResourceAttributes) {
    CHECK(resource_attribute_from_string(to_string(a)) == a);
  }
  CHECK(!resource_attribute_from_string("SPEED"));
  CHECK(task_state_code(TaskPhase::dead) == -1);
  CHECK(task_state_code(TaskPhase::running) == 1);
  CHECK(mach_state_code(MachState::down) == 0);
}
