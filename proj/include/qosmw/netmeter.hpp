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
#include <functional>
#include <optional>
#include <vector>

#include "qosmw/atg.hpp"
#include "qosmw/executor.hpp"
#include "qosmw/transport.hpp"

namespace qosmw {

/// Links measured by `machine_rank`: every link whose lower-ranked endpoint
/// machine is `machine_rank`.
std::vector<int> designated_links(const Atg& atg, int machine_rank);

/// Machines owning at least one link, ascending rank.
std::vector<int> token_ring(const Atg& atg);

/// The master when it is in the ring, else the first ring member; -1 for an
/// empty ring.
int initial_token_holder(const Atg& atg);

struct TokenState {
  std::vector<int> ring;
  int holder = -1;
  std::int64_t generation = 0;
};

/// Hands the token to the next ring member that accepts it. `hand_over(rank)`
/// returns false for an unreachable member, which is skipped. Passing back to
/// the start of the ring increments the generation. When nobody accepts, the
/// holder keeps the token and the generation still advances.
TokenState pass_token(const TokenState& state, const std::function<bool(int)>& hand_over);

struct LinkMeasurement {
  int link_id = 0;
  double latency_ms = 0.0;
  double throughput_mbps = 0.0;
  std::int64_t measured_at_stamp = 0;
};

struct EchoPolicy {
  std::size_t small_bytes = 64;
  std::size_t bulk_bytes = 65536;
  int trials = 3;
  double timeout_ms = 1000.0;
};

/// Ping-pong metering of the path `from` -> `to`. latency = median small RTT
/// / 2; throughput counts the bulk payload crossing the link twice in
/// (median bulk RTT - median small RTT). nullopt when any echo goes
/// unanswered.
std::optional<LinkMeasurement> measure_link(Transport& transport, Executor& executor, int from, int to,
                                            int link_id, std::int64_t stamp, const EchoPolicy& policy = {});

}  // namespace qosmw
