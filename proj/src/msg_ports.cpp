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

#include "qosmw/msg_ports.hpp"

namespace qosmw {

void MailboxSet::deliver(int task_rank, int port_index, Message msg) {
  {
    std::lock_guard lk(mu_);
    boxes_[{task_rank, port_index, msg.key}].push_back(std::move(msg.payload));
  }
  executor_.notify_all();
}

std::optional<Message> MailboxSet::take(int task_rank, int port_index, std::uint32_t key) {
  std::lock_guard lk(mu_);
  auto it = boxes_.find({task_rank, port_index, key});
  if (it == boxes_.end() || it->second.empty()) return std::nullopt;
  Message m{key, std::move(it->second.front())};
  it->second.pop_front();
  if (it->second.empty()) boxes_.erase(it);
  return m;
}

bool MailboxSet::has(int task_rank, int port_index, std::uint32_t key) const {
  std::lock_guard lk(mu_);
  auto it = boxes_.find({task_rank, port_index, key});
  return it != boxes_.end() && !it->second.empty();
}

std::size_t MailboxSet::pending() const {
  std::lock_guard lk(mu_);
  std::size_t n = 0;
  for (const auto& [k, q] : boxes_) n += q.size();
  return n;
}

Bytes encode_message_body(int src_task, int src_port, const Message& msg) {
  Bytes out;
  out.reserve(8 + msg.payload.size());
  put_u16_be(out, static_cast<std::uint16_t>(src_task));
  put_u16_be(out, static_cast<std::uint16_t>(src_port));
  put_u32_be(out, msg.key);
  out.insert(out.end(), msg.payload.begin(), msg.payload.end());
  return out;
}

std::tuple<int, int, Message> decode_message_body(std::span<const std::uint8_t> body) {
  if (body.size() < 8) throw WireError("message frame too short");
  Message m;
  m.key = get_u32_be(body, 4);
  m.payload.assign(body.begin() + 8, body.end());
  return {get_u16_be(body, 0), get_u16_be(body, 2), std::move(m)};
}

Port::Port(const Atg& atg, int task_rank, int port_index, MessageNetwork& network, MailboxSet& mailboxes,
           std::function<bool()> peer_marked_dead)
    : task_rank_(task_rank),
      port_index_(port_index),
      network_(network),
      mailboxes_(mailboxes),
      peer_marked_dead_(std::move(peer_marked_dead)) {
  atg.port_peer(task_rank, port_index);
}

void Port::async_write(const Message& msg) { network_.send(task_rank_, port_index_, msg, false); }

void Port::sync_write(const Message& msg) { network_.send(task_rank_, port_index_, msg, true); }

Message Port::sync_read(std::uint32_t key) {
  if (auto m = mailboxes_.take(task_rank_, port_index_, key)) return *m;
  if (peer_marked_dead_ && peer_marked_dead_()) throw PeerDead("peer dead");
  auto& ex = mailboxes_.executor();
  ex.wait_until([&] { return mailboxes_.has(task_rank_, port_index_, key); }, -1.0);
  return *mailboxes_.take(task_rank_, port_index_, key);
}

std::optional<Message> Port::sync_read(std::uint32_t key, double timeout_ms) {
  if (auto m = mailboxes_.take(task_rank_, port_index_, key)) return m;
  if (peer_marked_dead_ && peer_marked_dead_()) throw PeerDead("peer dead");
  auto& ex = mailboxes_.executor();
  if (!ex.wait_until([&] { return mailboxes_.has(task_rank_, port_index_, key); }, timeout_ms)) return std::nullopt;
  return mailboxes_.take(task_rank_, port_index_, key);
}

std::optional<Message> Port::async_read(std::uint32_t key) { return mailboxes_.take(task_rank_, port_index_, key); }

void Port::flush() {
  network_.drain(task_rank_, port_index_);
  if (auto err = network_.take_async_error(task_rank_, port_index_)) throw PeerUnreachable(*err);
}

}  // namespace qosmw
