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

#include "qosmw/qos_manager.hpp"
#include "qosmw/wire.hpp"
#include "support.hpp"

using namespace qosmw;
using namespace qosmw::testing;

namespace {

ManagerConfig period(double ms) {
  ManagerConfig c;
  c.period_ms = ms;
  return c;
}

std::set<int> destinations(const std::vector<TrafficRecord>& log, int from, std::uint8_t op) {
  std::set<int> out;
  for (const auto& r : log) {
    if (r.from == from && r.opcode == op) out.insert(r.to);
  }
  return out;
}

}  // namespace

TEST_CASE("each machine fetches only its peer machines") {
  const AtgPtr atg = atg_ptr(kStarGraph);
  SimDeployment d(atg, sim_machines(*atg), period(1000));
  for (int m = 0; m < 3; ++m) run_process(d, m, [&] { d.manager(m).run_cycle(); });
  const auto log = d.transport().records();
  CHECK(destinations(log, 1, opcode::kGetMachAttrs) == std::set<int>{0});
  CHECK(destinations(log, 2, opcode::kGetMachAttrs) == std::set<int>{0});
  CHECK(destinations(log, 0, opcode::kGetMachAttrs) == std::set<int>{1, 2});
  for (const auto& r : log) {
    if (r.from == 1) CHECK(r.to != 2);
    if (r.from == 2) CHECK(r.to != 1);
  }
}

TEST_CASE("a single-machine application never touches the network") {
  const AtgPtr atg = atg_ptr(
      "machine solo host=x port=1 master\n"
      "task a machine=solo ports=1 impl=x\ntask b machine=solo ports=1 impl=x\nlink a.0 b.0\n");
  SimDeployment d(atg, sim_machines(*atg), period(1000));
  d.start_monitoring();
  run_until_global_stamp(d, 5);
  CHECK(d.transport().records().empty());
  CHECK(d.manager(0).local().stamp() == 5);
  CHECK(d.manager(0).local().link_attrs(0).last_measured_stamp == 5);
}

TEST_CASE("wire requests") {
  const AtgPtr atg = atg_ptr(kTwoWorkerGraph);
  SimDeployment d(atg, sim_machines(*atg), period(1000));
  QosManager& m2 = d.manager(1);

  CHECK(m2.serve_request(Frame{opcode::kPing, {}}).opcode == opcode::kPing);

  const Frame report{opcode::kReportTaskState,
                     to_bytes(encode_task_report(1, TaskState{TaskPhase::running, 4242}))};
  CHECK(m2.serve_request(report).opcode == opcode::kReportTaskState);
  CHECK(m2.local().task_state(1).pid == 4242);

  const Frame wrong_host{opcode::kReportTaskState, to_bytes(encode_task_report(0, TaskState{TaskPhase::running, 1}))};
  CHECK(m2.serve_request(wrong_host).opcode == opcode::kErr);

  const Frame bulk{opcode::kEchoBulk, Bytes(65536, 0x5A)};
  const Frame echoed = m2.serve_request(bulk);
  CHECK(echoed == bulk);

  CHECK(m2.serve_request(Frame{opcode::kGetAppView, {}}).opcode == opcode::kErr);
  CHECK(d.manager(0).serve_request(Frame{opcode::kGetAppView, {}}).opcode == opcode::kGetAppView);
  CHECK(m2.serve_request(Frame{0x42, {}}).opcode == opcode::kErr);
  CHECK(m2.serve_request(Frame{opcode::kReportTaskState, to_bytes("garbage")}).opcode == opcode::kErr);

  const Frame attrs = m2.serve_request(Frame{opcode::kGetMachAttrs, {}});
  REQUIRE(attrs.opcode == opcode::kGetMachAttrs);
  CHECK(decode_machine_report(to_string(attrs.payload)).machine_rank == 1);
}

TEST_CASE("a reported pid shows up in the process listing") {
  const AtgPtr atg = atg_ptr(kTwoWorkerGraph);
  SimDeployment d(atg, sim_machines(*atg), period(1000));
  std::set<std::int64_t> listed;
  d.spawn_task(1, [&](QosService&) {
    const Frame r = d.manager(1).serve_request(Frame{opcode::kListPids, {}});
    listed = decode_pids(to_string(r.payload));
  });
  d.kernel().run();
  REQUIRE(d.task_pid(1));
  CHECK(listed.count(*d.task_pid(1)) == 1);
  CHECK(d.manager(1).local().task_state(1).phase == TaskPhase::completed);
}

TEST_CASE("stop freezes the stamp and resume restarts it") {
  const AtgPtr atg = atg_ptr(kTwoWorkerGraph);
  SimDeployment d(atg, sim_machines(*atg), period(1000));
  d.start_monitoring();
  run_until_global_stamp(d, 3);
  QosManager& master = d.manager(0);
  for (QosManager* m : d.managers()) m->stop();
  const double t = d.kernel().now_ms();
  d.kernel().run([&] { return d.kernel().now_ms() >= t + 1500; });
  const std::int64_t frozen = master.local().stamp();
  d.transport().clear();
  d.kernel().run({}, t + 20000);
  CHECK(master.local().stamp() == frozen);
  CHECK(d.transport().records().empty());
  CHECK(master.serve_request(Frame{opcode::kPing, {}}).opcode == opcode::kPing);

  for (QosManager* m : d.managers()) m->resume();
  const std::int64_t before = master.global()->stamp();
  run_until_global_stamp(d, before + 2);
  CHECK(master.local().stamp() > frozen);
}

TEST_CASE("set_period changes the gap between cycles") {
  const AtgPtr atg = atg_ptr(kTwoWorkerGraph);
  SimDeployment d(atg, sim_machines(*atg), period(30000));
  d.start_monitoring();
  run_until_global_stamp(d, 2);
  QosManager& master = d.manager(0);
  master.set_period(5000);
  CHECK(master.period() == 5000);
  CHECK_THROWS_AS(master.set_period(0), QosError);
  CHECK_THROWS_AS(master.set_period(-5), QosError);
  run_until_global_stamp(d, 6);
  const auto starts = master.cycle_starts();
  REQUIRE(starts.size() >= 6);
  CHECK(starts[1] - starts[0] == doctest::Approx(30000));
  for (std::size_t i = 3; i < starts.size(); ++i) CHECK(starts[i] - starts[i - 1] == doctest::Approx(5000));
}

TEST_CASE("disabled monitoring sends nothing") {
  const AtgPtr atg = atg_ptr(kStarGraph);
  ManagerConfig c = period(1000);
  c.enabled = false;
  SimDeployment d(atg, sim_machines(*atg), c);
  d.start_monitoring();
  d.kernel().run({}, 60000);
  CHECK(d.transport().records().empty());
  CHECK(d.manager(0).global()->stamp() == 0);
}

TEST_CASE("one manager per machine and launch is idempotent") {
  const AtgPtr atg = atg_ptr(kStarGraph);
  SimDeployment d(atg, sim_machines(*atg), period(1000));
  CHECK(d.managers().size() == 3);

  ManagerDirectory dir;
  int built = 0;
  RealExecutor ex;
  LoopbackTransport net;
  struct NullProvider final : ProbeProvider {
    std::string os_type() override { return "x"; }
    double cpu_speed_mhz() override { return 1; }
    int num_cpus() override { return 1; }
    double workload() override { return 0; }
    std::int64_t free_ram_bytes() override { return 0; }
    std::int64_t free_swap_bytes() override { return 0; }
    bool ping(int, double) override { return true; }
    std::optional<std::set<std::int64_t>> list_pids(int) override { return std::set<std::int64_t>{}; }
  } provider;
  auto make = [&] {
    ++built;
    return std::make_unique<QosManager>(atg, 1, ManagerConfig{}, net, ex, provider);
  };
  QosManager& a = dir.launch(1, make);
  QosManager& b = dir.launch(1, make);
  CHECK(&a == &b);
  CHECK(built == 1);
  CHECK(dir.size() == 1);
}

TEST_CASE("the master snapshot covers every machine") {
  const AtgPtr atg = atg_ptr(kStarGraph);
  SimDeployment d(atg, sim_machines(*atg), period(1000));
  d.cluster().set_load(2, LoadSchedule::fixed(2));
  d.start_monitoring();
  run_until_global_stamp(d, 3);
  const AppView v = d.manager(0).global()->snapshot_app_view();
  REQUIRE(v.machines.size() == 3);
  CHECK(v.machines[2].attrs.workload == 2.0);
  CHECK(v.machines[2].attrs.effective_speed_mhz == doctest::Approx(111.0));
  CHECK(v.machines[1].attrs.workload == 0.0);
  CHECK(destinations(d.transport().records(), 0, opcode::kGetMachAttrs) == std::set<int>{1, 2});
}

TEST_CASE("a down peer is marked down and its running tasks dead") {
  const AtgPtr atg = atg_ptr(kStarGraph);
  SimDeployment d(atg, sim_machines(*atg), period(1000));
  d.spawn_task(3, [&](QosService&) { d.kernel().sleep_for(1e9); });
  d.start_monitoring();
  run_until_global_stamp(d, 2);
  CHECK(d.manager(0).global()->task_states().at(3).phase == TaskPhase::running);
  d.cluster().set_up(2, false);
  const std::int64_t k = d.manager(0).global()->stamp();
  run_until_global_stamp(d, k + 2);
  const AppView v = d.manager(0).global()->snapshot_app_view();
  CHECK(v.machines[2].attrs.mach_state == MachState::down);
  CHECK(d.manager(0).global()->task_states().at(3).phase == TaskPhase::dead);
}

TEST_CASE("the application run leaves no monitoring loops behind") {
  SimAppConfig c;
  c.workers = 2;
  c.n = 6;
  c.s = 16;
  c.period_ms = 5000;
  c.worker.compute = false;
  const SimAppResult r = run_sim_app(c);
  CHECK(r.ok);
  CHECK(r.managers_left == 0);
}
