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

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "qosmw/atg.hpp"
#include "qosmw/msg_ports.hpp"
#include "qosmw/transport.hpp"

namespace qosmw {

/// Accepts TCP connections and answers each frame read from them with the
/// handler's reply frame. One thread per connection.
class FrameServer {
 public:
  /// Binds all interfaces on `port`; 0 picks a free port. Throws
  /// std::system_error.
  FrameServer(std::uint16_t port, FrameHandler handler);
  ~FrameServer();
  FrameServer(const FrameServer&) = delete;
  FrameServer& operator=(const FrameServer&) = delete;

  std::uint16_t port() const { return port_; }
  void stop();

 private:
  void accept_loop();
  void serve(int fd);

  FrameHandler handler_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  struct Connection {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };
  std::mutex mu_;
  std::list<Connection> connections_;
};

/// One request over a fresh connection; nullopt on connect failure, error,
/// or timeout.
std::optional<Frame> tcp_request(const std::string& host, std::uint16_t port, const Frame& request,
                                 double timeout_ms);

/// QoS transport between managers: machine r answers on its host at
/// base_port.
class TcpTransport final : public Transport {
 public:
  explicit TcpTransport(AtgPtr atg) : atg_(std::move(atg)) {}
  std::optional<Frame> request(int from, int to, const Frame& request, double timeout_ms) override;

 private:
  AtgPtr atg_;
};

/// Port offset of the task-message endpoint relative to a machine's base
/// port.
inline constexpr std::uint16_t kMessagePortOffset = 1;

/// Task messages over TCP. Each machine runs a FrameServer on
/// base_port + kMessagePortOffset whose handler is serve().
class TcpMessageNetwork final : public MessageNetwork {
 public:
  /// `task_alive` tells whether a local destination task still accepts
  /// messages.
  TcpMessageNetwork(AtgPtr atg, MailboxSet& mailboxes, std::function<bool(int)> task_alive = {},
                    double timeout_ms = 30000.0);
  ~TcpMessageNetwork() override;

  void send(int src_task, int src_port, const Message& msg, bool sync) override;
  std::optional<std::string> take_async_error(int src_task, int src_port) override;
  void drain(int src_task, int src_port) override;

  /// Handler for incoming message frames.
  Frame serve(const Frame& request);

 private:
  struct Outgoing {
    int task;
    int port;
    Frame frame;
  };
  bool deliver_remote(int src_task, int src_port, const Frame& f, std::string& error);
  void sender_loop();

  AtgPtr atg_;
  MailboxSet& mailboxes_;
  std::function<bool(int)> task_alive_;
  double timeout_ms_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Outgoing> queue_;
  std::map<std::pair<int, int>, int> in_flight_;
  std::map<std::pair<int, int>, std::string> async_errors_;
  bool stopping_ = false;
  std::thread sender_;
};

}  // namespace qosmw
