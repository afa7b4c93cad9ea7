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
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>

#include "qosmw/atg.hpp"
#include "qosmw/executor.hpp"
#include "qosmw/wire.hpp"

namespace qosmw {

/// sync_write could not reach the peer task, or an earlier async_write
/// failed (reported on flush).
class PeerUnreachable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// sync_read on a port whose peer is already known to be dead.
class PeerDead : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Message {
  std::uint32_t key = 0;
  Bytes payload;

  friend bool operator==(const Message&, const Message&) = default;
};

/// Received messages of the tasks hosted by one runtime, queued per
/// (task, port, key) in arrival order.
class MailboxSet {
 public:
  explicit MailboxSet(Executor& executor) : executor_(executor) {}

  void deliver(int task_rank, int port_index, Message msg);
  std::optional<Message> take(int task_rank, int port_index, std::uint32_t key);
  bool has(int task_rank, int port_index, std::uint32_t key) const;
  std::size_t pending() const;

  Executor& executor() { return executor_; }

 private:
  Executor& executor_;
  mutable std::mutex mu_;
  std::map<std::tuple<int, int, std::uint32_t>, std::deque<Bytes>> boxes_;
};

/// Carries messages between task ports. Implementations resolve the peer
/// endpoint from the task graph.
class MessageNetwork {
 public:
  virtual ~MessageNetwork() = default;

  /// Sends from (src_task, src_port) to the peer endpoint of that port. With
  /// `sync` the call returns once the peer runtime holds the message and
  /// throws PeerUnreachable otherwise; without it failures are recorded for
  /// take_async_error().
  virtual void send(int src_task, int src_port, const Message& msg, bool sync) = 0;

  /// First recorded failure of an async send from the port, cleared on read.
  virtual std::optional<std::string> take_async_error(int src_task, int src_port) = 0;

  /// Waits until every async send from the port has left the sender.
  virtual void drain(int, int) {}
};

/// Message frame body: `src_task:2 | src_port:2 | key:4 | payload`, carried
/// under opcode 0x10.
Bytes encode_message_body(int src_task, int src_port, const Message& msg);
std::tuple<int, int, Message> decode_message_body(std::span<const std::uint8_t> body);

/// One end of a logical link as seen by its owning task. Operations never
/// name the destination: it is the port's peer in the task graph.
class Port {
 public:
  Port(const Atg& atg, int task_rank, int port_index, MessageNetwork& network, MailboxSet& mailboxes,
       std::function<bool()> peer_marked_dead = {});

  int task_rank() const { return task_rank_; }
  int port_index() const { return port_index_; }

  void async_write(const Message& msg);
  void sync_write(const Message& msg);

  /// Blocks until a message with `key` arrives. Throws PeerDead without
  /// blocking when the mailbox is empty and the peer is already marked dead.
  Message sync_read(std::uint32_t key);
  /// As sync_read, giving up after `timeout_ms`.
  std::optional<Message> sync_read(std::uint32_t key, double timeout_ms);
  std::optional<Message> async_read(std::uint32_t key);

  /// Raises PeerUnreachable for a failed earlier async_write.
  void flush();

 private:
  int task_rank_;
  int port_index_;
  MessageNetwork& network_;
  MailboxSet& mailboxes_;
  std::function<bool()> peer_marked_dead_;
};

}  // namespace qosmw
