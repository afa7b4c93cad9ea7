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

#include <algorithm>

#include "qosmw/qos_manager.hpp"
#include "qosmw/views.hpp"
#include "qosmw/wire.hpp"
#include "support.hpp"

using namespace qosmw;
using namespace qosmw::testing;

namespace {

constexpr int kGraphs = 120;

struct Poll {
  int machine;
  MachineReport report;
};

struct Observed {
  AtgPtr atg;
  std::vector<Poll> polls;
  std::vector<std::int64_t> global_stamps;
  std::vector<TrafficRecord> traffic;
  std::vector<MeasureInterval> intervals;
  std::vector<TaskView> task_views;
  std::vector<MachView> mach_views;
  AppView app;
};

// Runs monitoring on a random graph with random loads while a probe process
// polls managers for their records between and during cycles.
Observed observe(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Observed o;
  o.atg = std::make_shared<const Atg>(random_atg(rng, 5, 10));
  auto machines = sim_machines(*o.atg);
  std::uniform_int_distribution<int> load(0, 3);
  for (auto& m : machines) m.load = LoadSchedule::fixed(load(rng));
  ManagerConfig cfg;
  cfg.period_ms = 1000;
  SimDeployment d(o.atg, machines, cfg);
  d.start_monitoring();

  const int M = o.atg->num_machines();
  QosManager& master = d.manager(o.atg->master_rank());
  bool stop = false;
  d.cluster().spawn_on(o.atg->master_rank(), "poller", [&] {
    std::uniform_int_distribution<int> pick(0, M - 1);
    std::uniform_real_distribution<double> gap(1.0, 250.0);
    while (!stop) {
      const int m = pick(rng);
      if (!d.has_manager(m)) {
        d.kernel().sleep_for(1.0);
        continue;
      }
      const Frame r = d.manager(m).serve_request(Frame{opcode::kGetMachAttrs, {}});
      o.polls.push_back({m, decode_machine_report(to_string(r.payload))});
      o.global_stamps.push_back(master.global()->stamp());
      d.kernel().sleep_for(gap(rng));
    }
  });
  run_until_global_stamp(d, 4);
  stop = true;

  o.traffic = d.transport().records();
  for (QosManager* m : d.managers()) {
    const auto log = m->measure_log();
    o.intervals.insert(o.intervals.end(), log.begin(), log.end());
  }
  for (int t = 0; t < o.atg->num_tasks(); ++t) {
    o.task_views.push_back(d.manager(o.atg->machine_of(t)).local().snapshot_task_view(t));
  }
  for (int m = 0; m < M; ++m) {
    if (d.has_manager(m)) o.mach_views.push_back(d.manager(m).local().snapshot_mach_view());
  }
  o.app = master.global()->snapshot_app_view();
  return o;
}

const std::vector<Observed>& corpus() {
  static const std::vector<Observed> all = [] {
    std::vector<Observed> v;
    for (int i = 0; i < kGraphs; ++i) v.push_back(observe(1000 + static_cast<std::uint64_t>(i)));
    return v;
  }();
  return all;
}

}  // namespace

TEST_CASE("a record read between cycles is whole") {
  for (const Observed& o : corpus()) {
    std::map<std::pair<int, std::int64_t>, MachineReport> first;
    for (const Poll& p : o.polls) {
      CHECK(p.report.machine_rank == p.machine);
      const auto [it, fresh] = first.emplace(std::pair{p.machine, p.report.stamp}, p.report);
      if (!fresh) CHECK(it->second == p.report);
    }
  }
}

TEST_CASE("stamps never go backwards") {
  for (const Observed& o : corpus()) {
    std::map<int, std::int64_t> last;
    for (const Poll& p : o.polls) {
      CHECK(p.report.stamp >= last[p.machine]);
      last[p.machine] = p.report.stamp;
    }
    CHECK(std::is_sorted(o.global_stamps.begin(), o.global_stamps.end()));
    CHECK(o.app.stamp >= 4);
  }
}

TEST_CASE("views follow the task graph") {
  for (const Observed& o : corpus()) {
    const Atg& g = *o.atg;
    for (const TaskView& v : o.task_views) {
      REQUIRE(static_cast<int>(v.ports.size()) == g.task(v.rank).num_ports);
      CHECK(v.machine_rank == g.machine_of(v.rank));
      for (const PortView& p : v.ports) {
        const PortPeer peer = g.port_peer(v.rank, p.port_index);
        CHECK(p.link_id == peer.link_id);
        CHECK(p.peer_task_rank == peer.task_rank);
        CHECK(p.peer_port_index == peer.port_index);
        CHECK(p.peer_machine_rank == peer.machine_rank);
        CHECK(p.peer_task_name == g.task(peer.task_rank).variable_name);
        CHECK(p.peer_machine_name == g.machine(peer.machine_rank).name);
      }
    }
    for (const MachView& mv : o.mach_views) CHECK(static_cast<int>(mv.tasks.size()) == static_cast<int>(g.tasks_on(mv.rank).size()));
    REQUIRE(static_cast<int>(o.app.machines.size()) == g.num_machines());
    int tasks = 0;
    for (const MachView& mv : o.app.machines) tasks += static_cast<int>(mv.tasks.size());
    CHECK(tasks == g.num_tasks());
  }
}

TEST_CASE("machines fetch only from their peers and the master from every other task host") {
  for (const Observed& o : corpus()) {
    const Atg& g = *o.atg;
    for (int m = 0; m < g.num_machines(); ++m) {
      std::set<int> fetched;
      for (const TrafficRecord& r : o.traffic) {
        if (r.from == m && r.opcode == opcode::kGetMachAttrs) fetched.insert(r.to);
      }
      if (m == g.master_rank()) {
        std::set<int> others;
        for (int k = 0; k < g.num_machines(); ++k) {
          if (k != m && !g.tasks_on(k).empty()) others.insert(k);
        }
        CHECK(fetched == others);
      } else {
        const std::set<int> peers = peer_machine_set(g, m);
        CHECK(std::includes(peers.begin(), peers.end(), fetched.begin(), fetched.end()));
      }
    }
  }
}

TEST_CASE("at most one link is measured at a time") {
  int measured = 0;
  for (const Observed& o : corpus()) {
    std::vector<MeasureInterval> iv = o.intervals;
    std::sort(iv.begin(), iv.end(), [](const auto& a, const auto& b) {
      return std::pair{a.begin_ms, a.end_ms} < std::pair{b.begin_ms, b.end_ms};
    });
    for (std::size_t i = 1; i < iv.size(); ++i) CHECK(iv[i].begin_ms >= iv[i - 1].end_ms);
    measured += static_cast<int>(iv.size());
  }
  CHECK(measured > 0);
}

TEST_CASE("views never expose host addresses") {
  for (const Observed& o : corpus()) {
    for (const TaskView& v : o.task_views) CHECK(to_text(v).find("host-") == std::string::npos);
    for (const MachView& v : o.mach_views) CHECK(to_text(v).find("host-") == std::string::npos);
    CHECK(to_text(o.app).find("host-") == std::string::npos);
    CHECK(to_text(o.app).find(".example") == std::string::npos);
  }
}
