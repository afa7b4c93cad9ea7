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
#include <mutex>
#include <optional>
#include <set>
#include <vector>

#include "qosmw/wire.hpp"

namespace qosmw {

using FrameHandler = std::function<Frame(const Frame&)>;

/// Request/response channel between QoS managers, addressed by machine rank.
class Transport {
 public:
  virtual ~Transport() = default;

  /// Sends `request` from machine `from` to the manager on machine `to`.
  /// Returns nullopt when no reply arrives within `timeout_ms`.
  virtual std::optional<Frame> request(int from, int to, const Frame& request, double timeout_ms) = 0;
};

struct TrafficRecord {
  double at_ms = 0;
  int from = 0;
  int to = 0;
  std::uint8_t opcode = 0;
  bool answered = false;
};

/// Keeps a log of every request passing through to another transport.
class RecordingTransport final : public Transport {
 public:
  RecordingTransport(Transport& inner, std::function<double()> clock = {});

  std::optional<Frame> request(int from, int to, const Frame& request, double timeout_ms) override;

  std::vector<TrafficRecord> records() const;
  /// Machines `from` ever sent `op` to.
  std::set<int> contacted(int from, std::uint8_t op) const;
  void clear();

 private:
  Transport& inner_;
  std::function<double()> clock_;
  mutable std::mutex mu_;
  std::vector<TrafficRecord> log_;
};

/// In-process transport with no delay: requests call the bound handler
/// directly. Unbound or downed ranks never answer.
class LoopbackTransport final : public Transport {
 public:
  void bind(int rank, FrameHandler handler);
  void unbind(int rank);
  void set_down(int rank, bool down);

  std::optional<Frame> request(int from, int to, const Frame& request, double timeout_ms) override;

 private:
  std::mutex mu_;
  std::map<int, FrameHandler> handlers_;
  std::set<int> down_;
};

}  // namespace qosmw
