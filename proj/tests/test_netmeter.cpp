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

#include "qosmw/executor.hpp"
#include "qosmw/netmeter.hpp"
#include "qosmw/wire.hpp"
#include "support.hpp"

using namespace qosmw;
using namespace qosmw::testing;

TEST_CASE("manager machine measures both worker links") {
  const Atg g = parse_atg(kTwoWorkerGraph);
  CHECK(designated_links(g, 0) == std::vector<int>{0, 1});
  CHECK(designated_links(g, 1).empty());
  CHECK(designated_links(g, 2).empty());
  CHECK(token_ring(g) == std::vector<int>{0});
  CHECK(initial_token_holder(g) == 0);
}

TEST_CASE("links inside one machine stay on that machine") {
  const Atg g = parse_atg(
      "machine a host=x port=1 master\nmachine b host=y port=3\n"
      "task t machine=b ports=1 impl=x\ntask u machine=b ports=1 impl=x\nlink t.0 u.0\n");
  CHECK(designated_links(g, 0).empty());
  CHECK(designated_links(g, 1) == std::vector<int>{0});
  CHECK(token_ring(g) == std::vector<int>{1});
  CHECK(initial_token_holder(g) == 1);
}

TEST_CASE("designation partitions the links of random graphs") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const Atg g = random_atg(rng);
    std::vector<int> owner(g.links().size(), -1);
    for (int m = 0; m < g.num_machines(); ++m) {
      for (int l : designated_links(g, m)) {
        CHECK(owner[static_cast<std::size_t>(l)] == -1);
        owner[static_cast<std::size_t>(l)] = m;
      }
    }
    for (const auto& l : g.links()) {
      const int ma = g.machine_of(l.a.task_rank);
      const int mb = g.machine_of(l.b.task_rank);
      CHECK(owner[static_cast<std::size_t>(l.link_id)] == std::min(ma, mb));
    }
  }
}

TEST_CASE("token passing") {
  const auto all_accept = [](int) { return true; };
  SUBCASE("moves to the next member") {
    const TokenState next = pass_token({{0, 1, 2}, 0, 4}, all_accept);
    CHECK(next.holder == 1);
    CHECK(next.generation == 4);
  }
  SUBCASE("wraps around with a new generation") {
    const TokenState next = pass_token({{0, 1, 2}, 2, 4}, all_accept);
    CHECK(next.holder == 0);
    CHECK(next.generation == 5);
  }
  SUBCASE("skips an unreachable member") {
    const TokenState next = pass_token({{0, 1, 2}, 0, 0}, [](int r) { return r != 1; });
    CHECK(next.holder == 2);
    CHECK(next.generation == 0);
  }
  SUBCASE("nobody answers") {
    const TokenState next = pass_token({{0, 1, 2}, 1, 7}, [](int) { return false; });
    CHECK(next.holder == 1);
    CHECK(next.generation == 8);
  }
  SUBCASE("single member keeps the token") {
    const TokenState next = pass_token({{3}, 3, 0}, all_accept);
    CHECK(next.holder == 3);
    CHECK(next.generation == 1);
  }
}

TEST_CASE("simulated 1 ms / 100 Mbps link measures within 10%") {
  const AtgPtr atg = atg_ptr(kTwoWorkerGraph);
  SimDeployment d(atg, sim_machines(*atg), ManagerConfig{}, SimLinkConfig{1.0, 100.0});
  std::optional<LinkMeasurement> m;
  run_process(d, 0, [&] { m = measure_link(d.transport(), d.executor(), 0, 1, 0, 1); });
  REQUIRE(m);
  CHECK(m->link_id == 0);
  CHECK(m->measured_at_stamp == 1);
  CHECK(m->latency_ms == doctest::Approx(1.0).epsilon(0.10));
  CHECK(m->throughput_mbps == doctest::Approx(100.0).epsilon(0.10));
}

TEST_CASE("slower simulated link") {
  const AtgPtr atg = atg_ptr(kTwoWorkerGraph);
  SimDeployment d(atg, sim_machines(*atg), ManagerConfig{}, SimLinkConfig{5.0, 10.0});
  std::optional<LinkMeasurement> m;
  run_process(d, 0, [&] { m = measure_link(d.transport(), d.executor(), 0, 2, 1, 1); });
  REQUIRE(m);
  CHECK(m->latency_ms == doctest::Approx(5.0).epsilon(0.10));
  CHECK(m->throughput_mbps == doctest::Approx(10.0).epsilon(0.10));
}

TEST_CASE("in-process loopback has no latency and no rate cap") {
  LoopbackTransport net;
  net.bind(1, [](const Frame& f) { return f; });
  RealExecutor ex;
  const auto m = measure_link(net, ex, 0, 1, 0, 1);
  REQUIRE(m);
  CHECK(m->latency_ms < 1.0);
  CHECK(m->throughput_mbps >= 100.0);
}

TEST_CASE("unanswered echo gives no measurement") {
  LoopbackTransport net;
  RealExecutor ex;
  EchoPolicy p;
  p.timeout_ms = 10;
  CHECK(!measure_link(net, ex, 0, 1, 0, 1, p));
}

TEST_CASE("a down peer leaves the link stale with prior values") {
  const AtgPtr atg = atg_ptr(kTwoWorkerGraph);
  ManagerConfig cfg;
  cfg.period_ms = 1000;
  SimDeployment d(atg, sim_machines(*atg), cfg, SimLinkConfig{1.0, 100.0});
  auto& mgr = d.manager(0);
  run_process(d, 0, [&] { mgr.run_cycle(); });
  const LinkAttributes before = mgr.local().link_attrs(1);
  CHECK(!before.stale);
  CHECK(before.last_measured_stamp == 1);
  CHECK(before.throughput_mbps > 0);

  d.cluster().set_up(2, false);
  run_process(d, 0, [&] { mgr.run_cycle(); });
  const LinkAttributes after = mgr.local().link_attrs(1);
  CHECK(after.stale);
  CHECK(after.latency_ms == before.latency_ms);
  CHECK(after.throughput_mbps == before.throughput_mbps);
  CHECK(after.last_measured_stamp == 1);
  CHECK(!mgr.local().link_attrs(0).stale);
  CHECK(mgr.local().link_attrs(0).last_measured_stamp == 2);
}
