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

#include <numeric>
#include <random>

#include "qosmw/partitioner.hpp"
#include "qosmw/qos_service.hpp"
#include "support.hpp"

using namespace qosmw;
using namespace qosmw::testing;

namespace {

// L[m] = N (1/c[m]) / sum_k (1/c[k])
std::vector<double> oracle(int n, const std::vector<double>& cost) {
  double inv = 0;
  for (double c : cost) inv += 1.0 / c;
  std::vector<double> out;
  for (double c : cost) out.push_back(n * (1.0 / c) / inv);
  return out;
}

}  // namespace

TEST_CASE("cost is one plus the workload") {
  const BalanceProblem p = build_problem(60, {0, 0, 2, 2});
  CHECK(p.total_work == 60);
  CHECK(p.cost == std::vector<double>{1, 1, 3, 3});
  const BalanceProblem eq = build_problem(10, {1.5, 1.5, 1.5});
  CHECK(eq.cost[0] == eq.cost[1]);
  CHECK(eq.cost[1] == eq.cost[2]);
  CHECK_THROWS_AS(build_problem(10, {0, -1}), PartitionError);
  CHECK_THROWS_AS(build_problem(10, {}), PartitionError);
}

TEST_CASE("faster machines get proportionally cheaper units") {
  const BalanceProblem p = build_problem(10, {0, 0}, {500, 250});
  CHECK(p.cost[0] == doctest::Approx(1.0));
  CHECK(p.cost[1] == doctest::Approx(2.0));
}

TEST_CASE("balance solutions") {
  SUBCASE("two workers, costs 1 and 3") {
    const auto l = solve_balance({40, {1, 3}});
    CHECK(l[0] == doctest::Approx(30.0).epsilon(1e-12));
    CHECK(l[1] == doctest::Approx(10.0).epsilon(1e-12));
  }
  SUBCASE("three idle and three loaded workers") {
    const auto l = solve_balance({60, {1, 1, 1, 3, 3, 3}});
    const std::vector<double> want{15, 15, 15, 5, 5, 5};
    for (std::size_t i = 0; i < 6; ++i) CHECK(l[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
  SUBCASE("equal costs split evenly") {
    for (int n : {7, 60, 1001}) {
      for (double x : solve_balance({n, std::vector<double>(7, 2.5)})) CHECK(x == doctest::Approx(n / 7.0));
    }
  }
  SUBCASE("single worker takes everything") { CHECK(solve_balance({9, {4.0}}) == std::vector<double>{9.0}); }
}

TEST_CASE("LU matches the closed form on random systems") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> msize(1, 16);
  std::uniform_real_distribution<double> cost(1.0, 20.0);
  std::uniform_int_distribution<int> total(1, 5000);
  for (int trial = 0; trial < 500; ++trial) {
    const int m = msize(rng);
    BalanceProblem p{total(rng), {}};
    for (int i = 0; i < m; ++i) p.cost.push_back(cost(rng));
    const auto l = solve_balance(p);
    const auto want = oracle(p.total_work, p.cost);
    const auto closed = closed_form_balance(p);
    double sum = 0;
    for (int i = 0; i < m; ++i) {
      CHECK(l[static_cast<std::size_t>(i)] == doctest::Approx(want[static_cast<std::size_t>(i)]).epsilon(1e-9));
      CHECK(closed[static_cast<std::size_t>(i)] == doctest::Approx(want[static_cast<std::size_t>(i)]).epsilon(1e-12));
      sum += l[static_cast<std::size_t>(i)];
    }
    CHECK(std::abs(sum - p.total_work) <= 1e-9 * p.total_work);
    for (int i = 0; i + 1 < m; ++i) {
      const double resid = p.cost[static_cast<std::size_t>(i)] * l[static_cast<std::size_t>(i)] -
                           p.cost[static_cast<std::size_t>(i + 1)] * l[static_cast<std::size_t>(i + 1)];
      CHECK(std::abs(resid) <= 1e-9 * p.total_work);
    }
  }
}

TEST_CASE("raising one cost lowers that worker's share") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> cost(1.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    BalanceProblem p{100, {cost(rng), cost(rng), cost(rng), cost(rng)}};
    const auto before = solve_balance(p);
    const std::size_t i = static_cast<std::size_t>(trial % 4);
    p.cost[i] += 0.5;
    const auto after = solve_balance(p);
    CHECK(after[i] < before[i]);
  }
}

TEST_CASE("scaling every cost leaves the split unchanged") {
  const BalanceProblem p{60, {1.0, 2.0, 3.5}};
  BalanceProblem q = p;
  for (double& c : q.cost) c *= 7.25;
  const auto a = solve_balance(p);
  const auto b = solve_balance(q);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("LU solver") {
  const auto x = lu_solve({{0, 2}, {3, 1}}, {4, 5});
  CHECK(x[0] == doctest::Approx(1.0));
  CHECK(x[1] == doctest::Approx(2.0));
  CHECK_THROWS_AS(lu_solve({{1, 2}, {2, 4}}, {1, 2}), PartitionError);
}

TEST_CASE("largest-remainder rounding") {
  CHECK(round_counts({7.5, 2.5}, 10) == std::vector<int>{8, 2});
  CHECK(round_counts({3.2, 3.2, 3.6}, 10) == std::vector<int>{3, 3, 4});
  CHECK(round_counts({4, 6}, 10) == std::vector<int>{4, 6});
  CHECK(round_counts({1.0 / 3, 1.0 / 3, 1.0 / 3}, 1) == std::vector<int>{1, 0, 0});

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int total = 1 + trial;
    std::vector<double> w(static_cast<std::size_t>(1 + trial % 9));
    for (double& x : w) x = u(rng);
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& x : w) x = x / s * total;
    const auto c = round_counts(w, total);
    CHECK(std::accumulate(c.begin(), c.end(), 0) == total);
    for (std::size_t i = 0; i < w.size(); ++i) {
      CHECK(c[i] >= 0);
      CHECK(std::abs(c[i] - w[i]) < 1.0);
    }
  }
}

TEST_CASE("even split") {
  CHECK(even_split(60, 6) == std::vector<int>(6, 10));
  CHECK(even_split(10, 4) == std::vector<int>{3, 3, 2, 2});
  CHECK(even_split(2, 3) == std::vector<int>{1, 1, 0});
}

TEST_CASE("calc_l without monitoring splits evenly") {
  Partitioner part;
  CHECK(part.calc_l(60, 6, nullptr) == std::vector<int>(6, 10));
  CHECK(part.solves() == 0);
}

TEST_CASE("calc_l balances by peer workload and caches by stamp") {
  const AtgPtr atg = std::make_shared<const Atg>(make_manager_worker_atg(6));
  SimDeployment d(atg, sim_machines(*atg), ManagerConfig{});
  QosManager& master = d.manager(0);
  for (int m = 4; m <= 6; ++m) {
    MachineAttributes a;
    a.workload = 2;
    master.local().write_machine_attrs(m, a);
  }
  master.local().bump_stamp();
  QosService qos(master, 0);
  Partitioner part;
  CHECK(part.calc_l(60, 6, &qos) == std::vector<int>{15, 15, 15, 5, 5, 5});
  CHECK(part.solves() == 1);
  REQUIRE(part.last());
  CHECK(part.last()->real_solution[0] == doctest::Approx(15.0));

  // Unchanged stamp: a new reading is ignored.
  MachineAttributes busy;
  busy.workload = 5;
  master.local().write_machine_attrs(1, busy);
  CHECK(part.calc_l(60, 6, &qos) == std::vector<int>{15, 15, 15, 5, 5, 5});
  CHECK(part.solves() == 1);

  master.local().bump_stamp();
  const auto fresh = part.calc_l(60, 6, &qos);
  CHECK(part.solves() == 2);
  CHECK(std::accumulate(fresh.begin(), fresh.end(), 0) == 60);
  CHECK(fresh[0] < 15);
}
