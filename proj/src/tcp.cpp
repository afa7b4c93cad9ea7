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

#include "qosmw/tcp.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <system_error>

namespace qosmw {

namespace {

using Clock = std::chrono::steady_clock;

int remaining_ms(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
  return left < 0 ? 0 : static_cast<int>(std::min<long long>(left, 1 << 30));
}

Clock::time_point deadline_after(double ms) {
  return Clock::now() + std::chrono::microseconds(static_cast<long long>(ms * 1000.0));
}

bool wait_fd(int fd, short events, Clock::time_point deadline) {
  while (true) {
    pollfd p{fd, events, 0};
    const int r = ::poll(&p, 1, remaining_ms(deadline));
    if (r > 0) return true;
    if (r == 0) return false;
    if (errno != EINTR) return false;
  }
}

bool send_all(int fd, const Bytes& data, Clock::time_point deadline) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    if (!wait_fd(fd, POLLOUT, deadline)) return false;
    const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) continue;
      return false;
    }
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

std::optional<Frame> read_frame(int fd, FrameDecoder& dec, Clock::time_point deadline) {
  std::uint8_t buf[64 * 1024];
  while (true) {
    if (auto f = dec.next()) return f;
    if (!wait_fd(fd, POLLIN, deadline)) return std::nullopt;
    const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
    if (n < 0 && (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK)) continue;
    if (n <= 0) return std::nullopt;
    dec.feed(std::span<const std::uint8_t>(buf, static_cast<std::size_t>(n)));
  }
}

void set_nonblocking(int fd) { ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL, 0) | O_NONBLOCK); }

int connect_to(const std::string& host, std::uint16_t port, Clock::time_point deadline) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) return -1;
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    return -1;
  }
  set_nonblocking(fd);
  int rc = ::connect(fd, res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (rc < 0 && errno != EINPROGRESS) {
    ::close(fd);
    return -1;
  }
  if (rc < 0) {
    int err = 0;
    socklen_t len = sizeof err;
    if (!wait_fd(fd, POLLOUT, deadline) || ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len) != 0 || err != 0) {
      ::close(fd);
      return -1;
    }
  }
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return fd;
}

}  // namespace

// ---------------------------------------------------------------------------

FrameServer::FrameServer(std::uint16_t port, FrameHandler handler) : handler_(std::move(handler)) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::system_error(errno, std::generic_category(), "socket");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 64) != 0) {
    const int e = errno;
    ::close(listen_fd_);
    throw std::system_error(e, std::generic_category(), "bind port " + std::to_string(port));
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  set_nonblocking(listen_fd_);
  acceptor_ = std::thread([this] { accept_loop(); });
}

FrameServer::~FrameServer() { stop(); }

void FrameServer::stop() {
  if (stopping_.exchange(true)) return;
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);
  std::list<Connection> conns;
  {
    std::lock_guard lk(mu_);
    conns.swap(connections_);
  }
  for (auto& c : conns) c.thread.join();
}

void FrameServer::accept_loop() {
  while (!stopping_) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 100) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    set_nonblocking(fd);
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    std::lock_guard lk(mu_);
    for (auto it = connections_.begin(); it != connections_.end();) {
      if (*it->done) {
        it->thread.join();
        it = connections_.erase(it);
      } else {
        ++it;
      }
    }
    auto done = std::make_shared<std::atomic<bool>>(false);
    connections_.push_back(Connection{std::thread([this, fd, done] {
                                        serve(fd);
                                        *done = true;
                                      }),
                                      done});
  }
}

void FrameServer::serve(int fd) {
  FrameDecoder dec;
  std::uint8_t buf[64 * 1024];
  while (!stopping_) {
    std::optional<Frame> f;
    try {
      f = dec.next();
    } catch (const WireError&) {
      break;
    }
    if (f) {
      Frame reply;
      try {
        reply = handler_(*f);
      } catch (const std::exception& e) {
        reply = make_error(e.what());
      }
      if (!send_all(fd, encode_frame(reply), deadline_after(30000.0))) break;
      continue;
    }
    pollfd p{fd, POLLIN, 0};
    const int r = ::poll(&p, 1, 100);
    if (r == 0) continue;
    if (r < 0 && errno == EINTR) continue;
    const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
    if (n < 0 && (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK)) continue;
    if (n <= 0) break;
    dec.feed(std::span<const std::uint8_t>(buf, static_cast<std::size_t>(n)));
  }
  ::close(fd);
}

std::optional<Frame> tcp_request(const std::string& host, std::uint16_t port, const Frame& request,
                                 double timeout_ms) {
  const auto deadline = deadline_after(timeout_ms);
  const int fd = connect_to(host, port, deadline);
  if (fd < 0) return std::nullopt;
  std::optional<Frame> reply;
  try {
    FrameDecoder dec;
    if (send_all(fd, encode_frame(request), deadline)) reply = read_frame(fd, dec, deadline);
  } catch (const WireError&) {
    reply.reset();
  }
  ::close(fd);
  return reply;
}

std::optional<Frame> TcpTransport::request(int, int to, const Frame& request, double timeout_ms) {
  const auto& m = atg_->machine(to);
  return tcp_request(m.host, m.base_port, request, timeout_ms);
}

// ---------------------------------------------------------------------------

TcpMessageNetwork::TcpMessageNetwork(AtgPtr atg, MailboxSet& mailboxes, std::function<bool(int)> task_alive,
                                     double timeout_ms)
    : atg_(std::move(atg)), mailboxes_(mailboxes), task_alive_(std::move(task_alive)), timeout_ms_(timeout_ms) {
  sender_ = std::thread([this] { sender_loop(); });
}

TcpMessageNetwork::~TcpMessageNetwork() {
  {
    std::lock_guard lk(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  sender_.join();
}

bool TcpMessageNetwork::deliver_remote(int src_task, int src_port, const Frame& f, std::string& error) {
  const PortPeer peer = atg_->port_peer(src_task, src_port);
  const auto& m = atg_->machine(peer.machine_rank);
  auto reply = tcp_request(m.host, static_cast<std::uint16_t>(m.base_port + kMessagePortOffset), f, timeout_ms_);
  if (!reply) {
    error = "no answer from machine " + std::to_string(peer.machine_rank);
    return false;
  }
  if (reply->opcode == opcode::kErr) {
    error = error_message(*reply);
    return false;
  }
  return true;
}

void TcpMessageNetwork::send(int src_task, int src_port, const Message& msg, bool sync) {
  Frame f{opcode::kMessage, encode_message_body(src_task, src_port, msg)};
  if (sync) {
    drain(src_task, src_port);
    std::string err;
    if (!deliver_remote(src_task, src_port, f, err)) throw PeerUnreachable(err);
    return;
  }
  {
    std::lock_guard lk(mu_);
    queue_.push_back(Outgoing{src_task, src_port, std::move(f)});
    ++in_flight_[{src_task, src_port}];
  }
  cv_.notify_all();
}

void TcpMessageNetwork::sender_loop() {
  std::unique_lock lk(mu_);
  while (true) {
    cv_.wait(lk, [this] { return stopping_ || !queue_.empty(); });
    if (queue_.empty()) return;
    Outgoing out = std::move(queue_.front());
    queue_.pop_front();
    lk.unlock();
    std::string err;
    const bool ok = deliver_remote(out.task, out.port, out.frame, err);
    lk.lock();
    const auto key = std::make_pair(out.task, out.port);
    if (!ok && !async_errors_.count(key)) async_errors_[key] = err;
    --in_flight_[key];
    cv_.notify_all();
  }
}

std::optional<std::string> TcpMessageNetwork::take_async_error(int src_task, int src_port) {
  std::lock_guard lk(mu_);
  auto it = async_errors_.find({src_task, src_port});
  if (it == async_errors_.end()) return std::nullopt;
  std::string e = std::move(it->second);
  async_errors_.erase(it);
  return e;
}

void TcpMessageNetwork::drain(int src_task, int src_port) {
  std::unique_lock lk(mu_);
  cv_.wait(lk, [&] { return in_flight_[{src_task, src_port}] == 0; });
}

Frame TcpMessageNetwork::serve(const Frame& request) {
  if (request.opcode != opcode::kMessage) return make_error("unsupported opcode");
  auto [src_task, src_port, msg] = decode_message_body(request.payload);
  if (src_task < 0 || src_task >= atg_->num_tasks() || src_port < 0 ||
      src_port >= atg_->task(src_task).num_ports) {
    return make_error("unknown source endpoint");
  }
  const PortPeer peer = atg_->port_peer(src_task, src_port);
  if (task_alive_ && !task_alive_(peer.task_rank)) return make_error("destination task is gone");
  mailboxes_.deliver(peer.task_rank, peer.port_index, std::move(msg));
  return Frame{opcode::kMessage, {}};
}

}  // namespace qosmw
