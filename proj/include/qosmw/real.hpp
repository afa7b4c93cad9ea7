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
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>

#include "qosmw/atg.hpp"
#include "qosmw/executor.hpp"
#include "qosmw/npc_app.hpp"
#include "qosmw/probes.hpp"
#include "qosmw/qos_manager.hpp"
#include "qosmw/tcp.hpp"

namespace qosmw {

/// Middleware of one machine on the real OS: the QoS manager, its wire
/// server, and the task-message endpoint. Tasks run as threads.
class RealNode {
 public:
  RealNode(AtgPtr atg, int machine_rank, ManagerConfig config);
  ~RealNode();
  RealNode(const RealNode&) = delete;
  RealNode& operator=(const RealNode&) = delete;

  /// Opens both endpoints; with `monitoring` also starts the periodic loop.
  void start(bool monitoring);
  void stop();

  int machine_rank() const { return rank_; }
  QosManager& manager() { return *manager_; }
  RealExecutor& executor() { return executor_; }
  MailboxSet& mailboxes() { return mailboxes_; }
  TcpMessageNetwork& messages() { return *messages_; }
  const AtgPtr& atg() const { return atg_; }

  /// Runs `body` for a local task on a new thread. The task reports running
  /// on entry and completed on return.
  std::thread run_task(int task_rank, std::function<void(QosService&)> body);

 private:
  AtgPtr atg_;
  int rank_;
  RealExecutor executor_;
  PidRegistry pids_;
  TcpTransport transport_;
  OsProbeProvider provider_;
  std::unique_ptr<QosManager> manager_;
  MailboxSet mailboxes_;
  std::unique_ptr<TcpMessageNetwork> messages_;
  std::unique_ptr<FrameServer> qos_server_;
  std::unique_ptr<FrameServer> msg_server_;
  std::thread loop_;
  std::mutex mu_;
  std::set<int> finished_tasks_;
};

struct RealAppConfig {
  /// Built with make_manager_worker_atg(workers, base_port, "127.0.0.1")
  /// when null.
  AtgPtr atg;
  int workers = 6;
  std::uint16_t base_port = 17000;
  int n = 60;
  int s = 500;
  std::uint64_t seed = 1;
  bool monitoring = true;
  double period_ms = 30000.0;
  ManagerOptions manager;
  WorkerOptions worker;
  /// Time allowed for every machine to come up.
  double startup_timeout_ms = 30000.0;
};

struct RealNodeResult {
  bool ok = false;
  std::string error;
  /// Manager task run time, wall ms; set on the manager's machine only.
  std::optional<double> elapsed_ms;
  std::optional<ManagerReport> report;
};

/// Machine `machine_rank` of a real deployment: brings its middleware up,
/// waits for the other machines, runs its tasks, and tears down.
RealNodeResult run_real_node(const RealAppConfig& config, int machine_rank);

/// Every machine of the deployment as threads of this process. Returns the
/// manager machine's result.
RealNodeResult run_real_app(const RealAppConfig& config);

AtgPtr real_app_atg(const RealAppConfig& config);

// ---------------------------------------------------------------------------

/// Background load for the real OS: jobs computing the FFT of a large array.
struct LoadPattern {
  enum class Kind { fixed, oscillate };
  Kind kind = Kind::fixed;
  double jobs = 1.0;
  double half_period_ms = 0.0;

  /// "static:K" or "oscillate:PEAK,HALF_PERIOD_MS". Throws
  /// std::invalid_argument.
  static LoadPattern parse(const std::string& text);
  /// Jobs to keep running at `t_ms` since start.
  int active_jobs(double t_ms) const;
};

struct LoadgenOptions {
  LoadPattern pattern;
  int fft_size = 5120;
  double relaunch_delay_ms = 100.0;
  /// Negative runs until `stop` is set.
  double duration_ms = -1.0;
};

/// Returns the number of FFT jobs completed.
std::uint64_t run_loadgen(const LoadgenOptions& options, const std::atomic<bool>& stop);

}  // namespace qosmw
