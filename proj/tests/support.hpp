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

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "qosmw/atg.hpp"
#include "qosmw/harness.hpp"
#include "qosmw/probes.hpp"

namespace qosmw::testing {

// Three machines, four tasks: T1 on the master M1 talks to T2 and T3 on M2
// and to T4 on M3.
inline const char* kStarGraph =
    "machine M1 host=h1 port=7001 master\n"
    "machine M2 host=h2 port=7002\n"
    "machine M3 host=h3 port=7003\n"
    "task T1 machine=M1 ports=3 impl=t1\n"
    "task T2 machine=M2 ports=1 impl=t2\n"
    "task T3 machine=M2 ports=1 impl=t3\n"
    "task T4 machine=M3 ports=1 impl=t4\n"
    "link T1.0 T2.0\n"
    "link T1.1 T3.0\n"
    "link T1.2 T4.0\n";

// Manager on M1 with ports 0 and 1 leading to W1 on M2 (link L1) and W2 on
// M3 (link L2).
inline const char* kTwoWorkerGraph =
    "machine M1 host=h1 port=7001 master\n"
    "machine M2 host=h2 port=7002\n"
    "machine M3 host=h3 port=7003\n"
    "task Manager machine=M1 ports=2 impl=npc_manager\n"
    "task W1 machine=M2 ports=1 impl=npc_worker\n"
    "task W2 machine=M3 ports=1 impl=npc_worker\n"
    "link Manager.0 W1.0\n"
    "link Manager.1 W2.0\n";

inline AtgPtr atg_ptr(const char* text) { return std::make_shared<const Atg>(parse_atg(text)); }

inline std::vector<SimMachineConfig> sim_machines(const Atg& atg, double mhz = 333.0) {
  std::vector<SimMachineConfig> out;
  for (const auto& m : atg.machines()) {
    SimMachineConfig c;
    c.name = m.name;
    c.cpu_speed_mhz = mhz;
    out.push_back(c);
  }
  return out;
}

/// Runs `fn` as a simulated process on `machine` and advances the kernel
/// until it returns.
inline void run_process(SimDeployment& d, int machine, const std::function<void()>& fn) {
  bool done = false;
  d.cluster().spawn_on(machine, "test", [&] {
    fn();
    done = true;
  });
  d.kernel().run([&] { return done; });
}

/// Runs the kernel until the master snapshot reaches `stamp`.
inline void run_until_global_stamp(SimDeployment& d, std::int64_t stamp) {
  auto& master = d.manager(d.atg().master_rank());
  d.kernel().run([&] { return master.global()->stamp() >= stamp; });
}

/// Random valid task graph: up to `max_machines` machines and `max_tasks`
/// tasks, every port linked to a port on another task.
inline Atg random_atg(std::mt19937_64& rng, int max_machines = 5, int max_tasks = 10) {
  std::uniform_int_distribution<int> mcount(1, max_machines);
  std::uniform_int_distribution<int> tcount(1, max_tasks);
  const int M = mcount(rng);
  const int T = tcount(rng);
  std::vector<MachineDecl> machines;
  const int master = std::uniform_int_distribution<int>(0, M - 1)(rng);
  for (int m = 0; m < M; ++m) {
    machines.push_back({m, "mach" + std::to_string(m), "host-" + std::to_string(m) + ".example",
                        static_cast<std::uint16_t>(9000 + 2 * m), m == master});
  }
  std::uniform_int_distribution<int> pick_m(0, M - 1);
  std::vector<int> ports(static_cast<std::size_t>(T), 0);
  std::vector<LinkDecl> links;
  if (T >= 2) {
    std::uniform_int_distribution<int> lcount(0, 2 * T);
    std::uniform_int_distribution<int> pick_t(0, T - 1);
    const int L = lcount(rng);
    for (int l = 0; l < L; ++l) {
      const int a = pick_t(rng);
      int b = pick_t(rng);
      if (a == b) b = (b + 1) % T;
      links.push_back({l, {a, ports[static_cast<std::size_t>(a)]++}, {b, ports[static_cast<std::size_t>(b)]++}});
    }
  }
  std::vector<TaskDecl> tasks;
  for (int t = 0; t < T; ++t) {
    tasks.push_back({t, "task" + std::to_string(t), pick_m(rng), ports[static_cast<std::size_t>(t)], "impl"});
  }
  return Atg(std::move(machines), std::move(tasks), std::move(links));
}

}  // namespace qosmw::testing
