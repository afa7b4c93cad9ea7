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

#include "qosmw/transport.hpp"

namespace qosmw {

RecordingTransport::RecordingTransport(Transport& inner, std::function<double()> clock)
    : inner_(inner), clock_(std::move(clock)) {}

std::optional<Frame> RecordingTransport::request(int from, int to, const Frame& request, double timeout_ms) {
  TrafficRecord rec{clock_ ? clock_() : 0.0, from, to, request.opcode, false};
  auto reply = inner_.request(from, to, request, timeout_ms);
  rec.answered = reply.has_value();
  std::lock_guard lk(mu_);
  log_.push_back(rec);
  return reply;
}

std::vector<TrafficRecord> RecordingTransport::records() const {
  std::lock_guard lk(mu_);
  return log_;
}

std::set<int> RecordingTransport::contacted(int from, std::uint8_t op) const {
  std::lock_guard lk(mu_);
  std::set<int> out;
  for (const auto& r : log_) {
    if (r.from == from && r.opcode == op) out.insert(r.to);
  }
  return out;
}

void RecordingTransport::clear() {
  std::lock_guard lk(mu_);
  log_.clear();
}

void LoopbackTransport::bind(int rank, FrameHandler handler) {
  std::lock_guard lk(mu_);
  handlers_[rank] = std::move(handler);
}

void LoopbackTransport::unbind(int rank) {
  std::lock_guard lk(mu_);
  handlers_.erase(rank);
}

void LoopbackTransport::set_down(int rank, bool down) {
  std::lock_guard lk(mu_);
  if (down) {
    down_.insert(rank);
  } else {
    down_.erase(rank);
  }
}

std::optional<Frame> LoopbackTransport::request(int, int to, const Frame& request, double) {
  FrameHandler h;
  {
    std::lock_guard lk(mu_);
    if (down_.count(to)) return std::nullopt;
    auto it = handlers_.find(to);
    if (it == handlers_.end()) return std::nullopt;
    h = it->second;
  }
  return h(request);
}

}  // namespace qosmw
