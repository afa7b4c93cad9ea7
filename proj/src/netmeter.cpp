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

#include "qosmw/netmeter.hpp"

#include <algorithm>
#include <set>

namespace qosmw {

std::vector<int> designated_links(const Atg& atg, int machine_rank) {
  std::vector<int> out;
  for (const auto& l : atg.links()) {
    const int owner = std::min(atg.machine_of(l.a.task_rank), atg.machine_of(l.b.task_rank));
    if (owner == machine_rank) out.push_back(l.link_id);
  }
  return out;
}

std::vector<int> token_ring(const Atg& atg) {
  std::set<int> owners;
  for (const auto& l : atg.links()) {
    owners.insert(std::min(atg.machine_of(l.a.task_rank), atg.machine_of(l.b.task_rank)));
  }
  return {owners.begin(), owners.end()};
}

int initial_token_holder(const Atg& atg) {
  auto ring = token_ring(atg);
  if (ring.empty()) return -1;
  if (std::find(ring.begin(), ring.end(), atg.master_rank()) != ring.end()) return atg.master_rank();
  return ring.front();
}

TokenState pass_token(const TokenState& state, const std::function<bool(int)>& hand_over) {
  TokenState next = state;
  const auto n = state.ring.size();
  if (n == 0) return next;
  auto it = std::find(state.ring.begin(), state.ring.end(), state.holder);
  const std::size_t from = it == state.ring.end() ? 0 : static_cast<std::size_t>(it - state.ring.begin());
  for (std::size_t step = 1; step < n; ++step) {
    const std::size_t idx = (from + step) % n;
    if (hand_over(state.ring[idx])) {
      next.holder = state.ring[idx];
      if (idx <= from) ++next.generation;
      return next;
    }
  }
  ++next.generation;
  return next;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::optional<double> median_rtt(Transport& transport, Executor& executor, int from, int to, std::uint8_t op,
                                 std::size_t bytes, const EchoPolicy& policy) {
  Frame f{op, Bytes(bytes)};
  for (std::size_t i = 0; i < bytes; ++i) f.payload[i] = static_cast<std::uint8_t>(i * 31 + 7);
  std::vector<double> rtts;
  for (int t = 0; t < std::max(1, policy.trials); ++t) {
    const double start = executor.now_ms();
    auto reply = transport.request(from, to, f, policy.timeout_ms);
    if (!reply || reply->opcode != op || reply->payload != f.payload) return std::nullopt;
    rtts.push_back(executor.now_ms() - start);
  }
  return median(std::move(rtts));
}

}  // namespace

std::optional<LinkMeasurement> measure_link(Transport& transport, Executor& executor, int from, int to,
                                            int link_id, std::int64_t stamp, const EchoPolicy& policy) {
  auto small = median_rtt(transport, executor, from, to, opcode::kEchoSmall, policy.small_bytes, policy);
  if (!small) return std::nullopt;
  auto bulk = median_rtt(transport, executor, from, to, opcode::kEchoBulk, policy.bulk_bytes, policy);
  if (!bulk) return std::nullopt;
  constexpr double kMinSeconds = 1e-6;
  const double seconds = std::max((*bulk - *small) / 1000.0, kMinSeconds);
  LinkMeasurement m;
  m.link_id = link_id;
  m.latency_ms = std::max(0.0, *small / 2.0);
  m.throughput_mbps = 8.0 * static_cast<double>(policy.bulk_bytes) / seconds * 1e-6 * 2.0;
  m.measured_at_stamp = stamp;
  return m;
}

}  // namespace qosmw
