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

#include "qosmw/npc_app.hpp"

#include <algorithm>
#include <set>

namespace qosmw {

namespace {

struct Block {
  int row_start = 0;
  int row_count = 0;
};

struct WorkerBook {
  bool dead = false;
  bool released = false;
  std::uint32_t next_assignment_key = 0;
  std::uint32_t next_result_key = 0;
  std::vector<Block> pending;  // sent but not yet gathered
};

class ManagerRun {
 public:
  ManagerRun(const CircuitSpec& spec, std::vector<Port>& ports, QosService& qos, const ManagerOptions& o)
      : spec_(spec), ports_(ports), qos_(qos), o_(o), book_(ports.size()) {
    report_.result.n = spec.n;
    report_.result.s = spec.s;
    report_.result.rows.assign(static_cast<std::size_t>(spec.n), std::nullopt);
  }

  ManagerReport run(Executor&) {
    const int workers = static_cast<int>(ports_.size());
    if (workers < 1) {
      report_.error = "no workers";
      return report_;
    }
    Partitioner partitioner(o_.partitioner);
    report_.partition = partitioner.calc_l(spec_.n, workers, o_.adaptive ? &qos_ : nullptr);

    int row = 0;
    for (int m = 0; m < workers; ++m) {
      const int count = report_.partition[static_cast<std::size_t>(m)];
      send_block(m, Block{row, count});
      row += count;
    }
    gather_all();

    if (o_.recovery) recover();
    release_all();

    for (int m = 0; m < workers; ++m) {
      if (book_[static_cast<std::size_t>(m)].dead) report_.dead_workers.push_back(m);
    }
    if (!report_.result.complete() && alive_count() == 0) report_.error = "all workers dead";
    return report_;
  }

 private:
  WorkerBook& book(int m) { return book_[static_cast<std::size_t>(m)]; }

  bool peer_dead(int m) { return o_.fault_guard && qos_.peer_task_state(m) == task_state_code(TaskPhase::dead); }

  int alive_count() const {
    return static_cast<int>(std::count_if(book_.begin(), book_.end(), [](const WorkerBook& b) { return !b.dead; }));
  }

  void mark_dead(int m) {
    auto& b = book(m);
    b.dead = true;
    b.pending.clear();
  }

  // Sends one assignment; a zero-row block releases the worker.
  void send_block(int m, Block blk) {
    auto& b = book(m);
    if (b.dead || b.released) return;
    if (peer_dead(m)) {
      mark_dead(m);
      return;
    }
    const Assignment a = blk.row_count == 0 ? make_release(spec_.n, spec_.s)
                                            : make_assignment(spec_, blk.row_start, blk.row_count, o_.full_y);
    try {
      ports_[static_cast<std::size_t>(m)].sync_write(Message{b.next_assignment_key++, encode_assignment(a)});
    } catch (const PeerUnreachable&) {
      mark_dead(m);
      return;
    }
    if (blk.row_count == 0) {
      b.released = true;
    } else {
      b.pending.push_back(blk);
    }
  }

  std::optional<Message> read_result(int m, std::uint32_t key) {
    auto& port = ports_[static_cast<std::size_t>(m)];
    try {
      if (!o_.fault_guard) return port.sync_read(key);
      while (true) {
        if (auto msg = port.async_read(key)) return msg;
        if (peer_dead(m)) return std::nullopt;
        if (auto msg = port.sync_read(key, o_.poll_ms)) return msg;
      }
    } catch (const PeerDead&) {
      return std::nullopt;
    }
  }

  void gather_worker(int m) {
    auto& b = book(m);
    while (!b.pending.empty() && !b.dead) {
      Block blk = b.pending.front();
      for (int k = 0; k < blk.row_count; ++k) {
        auto msg = read_result(m, b.next_result_key);
        if (!msg) {
          // A block from a dead worker counts as failed as a whole.
          for (int j = 0; j < k; ++j) report_.result.rows[static_cast<std::size_t>(blk.row_start + j)].reset();
          mark_dead(m);
          return;
        }
        ++b.next_result_key;
        try {
          auto [key, td] = decode_td_reply(msg->payload);
          if (key == msg->key && td.size() == static_cast<std::size_t>(spec_.s)) {
            report_.result.rows[static_cast<std::size_t>(blk.row_start + k)] = std::move(td);
          }
        } catch (const WireError&) {
        }
      }
      b.pending.erase(b.pending.begin());
    }
  }

  void gather_all() {
    for (int m = 0; m < static_cast<int>(ports_.size()); ++m) gather_worker(m);
  }

  void recover() {
    auto missing = report_.result.missing_rows();
    if (missing.empty()) return;
    std::vector<int> survivors;
    for (int m = 0; m < static_cast<int>(ports_.size()); ++m) {
      if (!book(m).dead && !book(m).released) survivors.push_back(m);
    }
    if (survivors.empty()) return;
    const auto shares = even_split(static_cast<int>(missing.size()), static_cast<int>(survivors.size()));
    std::size_t at = 0;
    for (std::size_t i = 0; i < survivors.size(); ++i) {
      const int m = survivors[i];
      const std::size_t end = at + static_cast<std::size_t>(shares[i]);
      // Contiguous runs of the share become separate assignments.
      while (at < end) {
        std::size_t run_end = at + 1;
        while (run_end < end && missing[run_end] == missing[run_end - 1] + 1) ++run_end;
        send_block(m, Block{missing[at], static_cast<int>(run_end - at)});
        at = run_end;
      }
    }
    gather_all();
    report_.recovered_rows = static_cast<int>(missing.size() - report_.result.missing_rows().size());
  }

  void release_all() {
    for (int m = 0; m < static_cast<int>(ports_.size()); ++m) send_block(m, Block{0, 0});
  }

  const CircuitSpec& spec_;
  std::vector<Port>& ports_;
  QosService& qos_;
  const ManagerOptions& o_;
  std::vector<WorkerBook> book_;
  ManagerReport report_;
};

}  // namespace

ManagerReport run_manager(const CircuitSpec& spec, std::vector<Port>& ports, QosService& qos, Executor& executor,
                          const ManagerOptions& options) {
  return ManagerRun(spec, ports, qos, options).run(executor);
}

WorkerStats run_worker(Port& port, QosService* qos, Executor& executor, int machine_rank, const WorkerOptions& o) {
  auto phase = [&](WorkerPhase p) {
    if (o.on_phase) o.on_phase(p);
  };
  auto manager_dead = [&] {
    return o.guard && qos && qos->peer_task_state(port.port_index()) == task_state_code(TaskPhase::dead);
  };
  phase(WorkerPhase::started);
  WorkerStats stats;
  std::uint32_t result_key = 0;
  for (std::uint32_t key = 0;; ++key) {
    std::optional<Message> msg;
    try {
      while (!msg) {
        msg = port.async_read(key);
        if (msg) break;
        if (manager_dead()) throw WorkerAbort("manager unreachable");
        msg = o.guard ? port.sync_read(key, o.poll_ms) : std::optional<Message>(port.sync_read(key));
      }
    } catch (const PeerDead&) {
      throw WorkerAbort("manager unreachable");
    }
    const Assignment a = decode_assignment(msg->payload);
    if (a.release()) return stats;
    ++stats.assignments;
    phase(WorkerPhase::received);
    for (int r = 0; r < a.row_count; ++r) {
      const int row = a.row_start + r;
      CVec td(static_cast<std::size_t>(a.s));
      if (o.compute) td = ifft(fd_currents(a.y_row(row), a.n, a.v).front());
      executor.consume_cpu(machine_rank, static_cast<double>(a.s) * o.mcycles_per_row_sample);
      port.async_write(Message{result_key, encode_td_reply(result_key, td)});
      ++result_key;
      ++stats.rows;
      if (r == a.row_count / 2) phase(WorkerPhase::mid_compute);
    }
    try {
      port.flush();
    } catch (const PeerUnreachable&) {
      throw WorkerAbort("manager unreachable");
    }
  }
}

}  // namespace qosmw
