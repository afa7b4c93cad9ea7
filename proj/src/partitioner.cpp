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

#include "qosmw/partitioner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "qosmw/qos_service.hpp"

namespace qosmw {

BalanceProblem build_problem(int total_work, const std::vector<double>& workloads, const std::vector<double>& speeds) {
  if (total_work < 1) throw PartitionError("total work must be >= 1");
  if (workloads.empty()) throw PartitionError("need at least one worker");
  if (!speeds.empty() && speeds.size() != workloads.size()) throw PartitionError("speed list length mismatch");
  BalanceProblem p;
  p.total_work = total_work;
  const double fastest = speeds.empty() ? 1.0 : *std::max_element(speeds.begin(), speeds.end());
  for (std::size_t m = 0; m < workloads.size(); ++m) {
    if (!(workloads[m] >= 0.0)) throw PartitionError("negative workload");
    double c = 1.0 + workloads[m];
    if (!speeds.empty()) {
      if (!(speeds[m] > 0.0)) throw PartitionError("non-positive speed");
      c *= fastest / speeds[m];
    }
    p.cost.push_back(c);
  }
  return p;
}

std::vector<double> lu_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  if (a.size() != n) throw PartitionError("matrix shape mismatch");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double scale = 0.0;
  for (const auto& row : a) {
    for (double v : row) scale = std::max(scale, std::abs(v));
  }
  const double tiny = std::max(scale, 1.0) * 1e-14;

  // Doolittle factorisation in place: L below the diagonal (unit), U above.
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(a[i][k]) > std::abs(a[piv][k])) piv = i;
    }
    if (std::abs(a[piv][k]) <= tiny) throw PartitionError("singular balance system");
    std::swap(a[k], a[piv]);
    std::swap(perm[k], perm[piv]);
    for (std::size_t i = k + 1; i < n; ++i) {
      a[i][k] /= a[k][k];
      for (std::size_t j = k + 1; j < n; ++j) a[i][j] -= a[i][k] * a[k][j];
    }
  }
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[perm[i]];
    for (std::size_t j = 0; j < i; ++j) s -= a[i][j] * y[j];
    y[i] = s;
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = y[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  return x;
}

std::vector<double> solve_balance(const BalanceProblem& p) {
  const std::size_t m = p.cost.size();
  if (m == 0) throw PartitionError("need at least one worker");
  for (double c : p.cost) {
    if (!(c > 0.0)) throw PartitionError("costs must be positive");
  }
  std::vector<std::vector<double>> a(m, std::vector<double>(m, 0.0));
  std::vector<double> b(m, 0.0);
  for (std::size_t r = 0; r + 1 < m; ++r) {
    a[r][r] = p.cost[r];
    a[r][r + 1] = -p.cost[r + 1];
  }
  for (std::size_t j = 0; j < m; ++j) a[m - 1][j] = 1.0;
  b[m - 1] = p.total_work;
  return lu_solve(std::move(a), std::move(b));
}

std::vector<double> closed_form_balance(const BalanceProblem& p) {
  double inv_sum = 0.0;
  for (double c : p.cost) inv_sum += 1.0 / c;
  std::vector<double> out;
  for (double c : p.cost) out.push_back(p.total_work * (1.0 / c) / inv_sum);
  return out;
}

std::vector<int> round_counts(const std::vector<double>& real_solution, int total) {
  const std::size_t m = real_solution.size();
  std::vector<int> counts(m);
  std::vector<double> frac(m);
  long assigned = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double v = std::max(0.0, real_solution[i]);
    // Snap values a rounding error away from an integer.
    const double near = std::round(v);
    const double f = std::abs(v - near) < 1e-9 * std::max(1.0, v) ? near : std::floor(v);
    counts[i] = static_cast<int>(f);
    frac[i] = std::abs(v - near) < 1e-9 * std::max(1.0, v) ? 0.0 : v - f;
    assigned += counts[i];
  }
  for (auto& f : frac) f = std::round(f * 1e9) / 1e9;
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  long left = total - assigned;
  for (std::size_t k = 0; left > 0 && m > 0; k = (k + 1) % m, --left) ++counts[order[k]];
  // Only reachable when the input overshoots `total`.
  for (std::size_t k = m; left < 0 && k-- > 0;) {
    while (left < 0 && counts[order[k]] > 0) {
      --counts[order[k]];
      ++left;
    }
  }
  return counts;
}

std::vector<int> even_split(int total, int workers) {
  if (workers < 1) throw PartitionError("need at least one worker");
  std::vector<int> out(static_cast<std::size_t>(workers), total / workers);
  for (int i = 0; i < total % workers; ++i) ++out[static_cast<std::size_t>(i)];
  return out;
}

std::vector<int> Partitioner::calc_l(int total, int workers, QosService* qos) {
  if (!qos) return even_split(total, workers);
  try {
    const auto stamp = qos->get_meas_stamp();
    if (old_stamp_ && *old_stamp_ == stamp && cached_.size() == static_cast<std::size_t>(workers)) return cached_;
    const auto tv = qos->get_task_view();
    if (tv.ports.size() < static_cast<std::size_t>(workers)) throw QosError("fewer ports than workers");
    std::vector<double> workloads, speeds;
    for (int m = 0; m < workers; ++m) {
      const auto& pm = tv.ports[static_cast<std::size_t>(m)].peer_machine;
      workloads.push_back(pm.workload);
      speeds.push_back(pm.cpu_speed_mhz);
    }
    auto problem = build_problem(total, workloads, options_.heterogeneous ? speeds : std::vector<double>{});
    Partition part;
    part.real_solution = solve_balance(problem);
    part.counts = round_counts(part.real_solution, total);
    ++solves_;
    last_ = part;
    cached_ = part.counts;
    old_stamp_ = stamp;
    return cached_;
  } catch (const QosError& e) {
    std::fprintf(stderr, "partitioner: QoS view unavailable (%s), using even split\n", e.what());
  } catch (const PartitionError& e) {
    std::fprintf(stderr, "partitioner: %s, using even split\n", e.what());
  }
  return even_split(total, workers);
}

}  // namespace qosmw
