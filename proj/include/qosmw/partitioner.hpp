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
#include <stdexcept>
#include <vector>

namespace qosmw {

class QosService;

class PartitionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Split `total_work` units so that cost[m] * L[m] is equal for all workers.
struct BalanceProblem {
  int total_work = 0;
  std::vector<double> cost;
};

struct Partition {
  std::vector<double> real_solution;
  std::vector<int> counts;
};

/// cost[m] = 1 + workloads[m]. With `speeds` (same length), costs are also
/// scaled by max(speeds) / speeds[m].
BalanceProblem build_problem(int total_work, const std::vector<double>& workloads,
                             const std::vector<double>& speeds = {});

/// Dense LU decomposition with partial pivoting; solves a x = b in place.
/// Throws PartitionError on a singular matrix.
std::vector<double> lu_solve(std::vector<std::vector<double>> a, std::vector<double> b);

/// Solves the M-1 balance rows cost[m] L[m] - cost[m+1] L[m+1] = 0 together
/// with sum(L) = total_work.
std::vector<double> solve_balance(const BalanceProblem& p);

/// total * (1/cost[m]) / sum_k(1/cost[k]).
std::vector<double> closed_form_balance(const BalanceProblem& p);

/// Largest-remainder rounding to integers summing to `total`; equal
/// remainders favour the lower index.
std::vector<int> round_counts(const std::vector<double>& real_solution, int total);

/// total / workers each, remainder to the lowest indices.
std::vector<int> even_split(int total, int workers);

struct PartitionerOptions {
  bool heterogeneous = false;
};

/// Work split used by the manager task. Without a QoS service the split is
/// even. With one, peer workloads are read from the task's ports (port m
/// leads to worker m) and the split is recomputed only when the measurement
/// stamp has changed since the previous call.
class Partitioner {
 public:
  explicit Partitioner(PartitionerOptions options = {}) : options_(options) {}

  std::vector<int> calc_l(int total, int workers, QosService* qos);

  /// Number of times the balance system was actually solved.
  int solves() const { return solves_; }
  const std::optional<Partition>& last() const { return last_; }

 private:
  PartitionerOptions options_;
  std::optional<std::int64_t> old_stamp_;
  std::vector<int> cached_;
  std::optional<Partition> last_;
  int solves_ = 0;
};

}  // namespace qosmw
