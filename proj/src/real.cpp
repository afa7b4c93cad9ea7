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

#include "qosmw/real.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "qosmw/npc.hpp"
#include "qosmw/qos_service.hpp"

namespace qosmw {

RealNode::RealNode(AtgPtr atg, int machine_rank, ManagerConfig config)
    : atg_(std::move(atg)),
      rank_(machine_rank),
      transport_(atg_),
      provider_(machine_rank, transport_, executor_, pids_),
      mailboxes_(executor_) {
  manager_ = std::make_unique<QosManager>(atg_, rank_, config, transport_, executor_, provider_);
  messages_ = std::make_unique<TcpMessageNetwork>(atg_, mailboxes_, [this](int t) {
    std::lock_guard lk(mu_);
    return !finished_tasks_.count(t);
  });
}

RealNode::~RealNode() { stop(); }

void RealNode::start(bool monitoring) {
  const std::uint16_t base = atg_->machine(rank_).base_port;
  msg_server_ = std::make_unique<FrameServer>(static_cast<std::uint16_t>(base + kMessagePortOffset),
                                               [this](const Frame& f) { return messages_->serve(f); });
  qos_server_ = std::make_unique<FrameServer>(base, [this](const Frame& f) { return manager_->serve_request(f); });
  if (monitoring) loop_ = std::thread([this] { manager_->run_loop(); });
}

void RealNode::stop() {
  manager_->shutdown();
  if (loop_.joinable()) loop_.join();
  if (qos_server_) qos_server_->stop();
  if (msg_server_) msg_server_->stop();
}

std::thread RealNode::run_task(int task_rank, std::function<void(QosService&)> body) {
  return std::thread([this, task_rank, body = std::move(body)] {
    const std::int64_t pid = executor_.self_pid();
    pids_.add(pid);
    QosService qos(*manager_, task_rank);
    qos.report_running(pid);
    try {
      body(qos);
    } catch (const std::exception&) {
    }
    try {
      qos.report_completed();
    } catch (const QosError&) {
    }
    {
      std::lock_guard lk(mu_);
      finished_tasks_.insert(task_rank);
    }
    pids_.remove(pid);
  });
}

// ---------------------------------------------------------------------------

AtgPtr real_app_atg(const RealAppConfig& config) {
  if (config.atg) return config.atg;
  return std::make_shared<const Atg>(make_manager_worker_atg(config.workers, config.base_port, "127.0.0.1"));
}

namespace {

int find_manager_task(const Atg& atg) {
  for (const auto& t : atg.tasks()) {
    if (t.component_id == "npc_manager") return t.rank;
  }
  return -1;
}

std::set<int> host_machines(const Atg& atg) {
  std::set<int> hosts{atg.master_rank()};
  for (const auto& t : atg.tasks()) hosts.insert(t.machine_rank);
  return hosts;
}

bool wait_for(Executor& ex, const std::function<bool()>& ok, double timeout_ms) {
  const double end = ex.now_ms() + timeout_ms;
  while (!ok()) {
    if (ex.now_ms() >= end) return false;
    ex.sleep_for(50.0);
  }
  return true;
}

}  // namespace

RealNodeResult run_real_node(const RealAppConfig& config, int machine_rank) {
  RealNodeResult res;
  const AtgPtr atg = real_app_atg(config);
  const int mgr_task = find_manager_task(*atg);
  if (mgr_task < 0) {
    res.error = "task graph has no npc_manager task";
    return res;
  }
  ManagerConfig mcfg;
  mcfg.period_ms = config.period_ms;
  mcfg.enabled = config.monitoring;
  RealNode node(atg, machine_rank, mcfg);
  try {
    node.start(config.monitoring);
  } catch (const std::exception& e) {
    res.error = e.what();
    return res;
  }
  auto& ex = node.executor();

  for (int m : host_machines(*atg)) {
    const bool up = wait_for(ex, [&] {
      auto r = node.manager().transport().request(machine_rank, m, Frame{opcode::kPing, {}}, 500.0);
      return r && r->opcode == opcode::kPing;
    }, config.startup_timeout_ms);
    if (!up) {
      res.error = "machine " + atg->machine(m).name + " did not come up";
      return res;
    }
  }
  if (config.monitoring) {
    const bool ready = wait_for(ex, [&] {
      auto* g = node.manager().global();
      return g ? g->stamp() >= 1 : node.manager().local().stamp() >= 1;
    }, config.startup_timeout_ms + 4 * config.period_ms);
    if (!ready) {
      res.error = "no monitoring snapshot";
      return res;
    }
  }

  const CircuitSpec spec = make_circuit(config.n, config.s, config.seed);
  std::vector<std::thread> threads;
  for (int t : atg->tasks_on(machine_rank)) {
    const TaskDecl& td = atg->task(t);
    if (t == mgr_task) {
      threads.push_back(node.run_task(t, [&](QosService& qos) {
        std::vector<Port> ports;
        for (int p = 0; p < td.num_ports; ++p) {
          ports.emplace_back(*atg, t, p, node.messages(), node.mailboxes(), [&qos, p] {
            return qos.peer_task_state(p) == task_state_code(TaskPhase::dead);
          });
        }
        const double t0 = ex.now_ms();
        res.report = run_manager(spec, ports, qos, ex, config.manager);
        res.elapsed_ms = ex.now_ms() - t0;
      }));
    } else if (td.component_id == "npc_worker") {
      threads.push_back(node.run_task(t, [&, t](QosService& qos) {
        Port port(*atg, t, 0, node.messages(), node.mailboxes(), [&qos] {
          return qos.peer_task_state(0) == task_state_code(TaskPhase::dead);
        });
        try {
          run_worker(port, &qos, ex, machine_rank, config.worker);
        } catch (const WorkerAbort&) {
        }
      }));
    }
  }
  for (auto& th : threads) th.join();
  if (res.report && !res.report->error.empty()) res.error = res.report->error;
  res.ok = res.error.empty();
  return res;
}

RealNodeResult run_real_app(const RealAppConfig& config) {
  RealAppConfig cfg = config;
  cfg.atg = real_app_atg(config);
  const int master = cfg.atg->master_rank();
  const int mgr_machine = cfg.atg->task(find_manager_task(*cfg.atg)).machine_rank;
  std::map<int, RealNodeResult> results;
  std::mutex mu;
  std::vector<std::thread> nodes;
  for (int m : host_machines(*cfg.atg)) {
    nodes.emplace_back([&, m] {
      RealNodeResult r = run_real_node(cfg, m);
      std::lock_guard lk(mu);
      results[m] = std::move(r);
    });
  }
  for (auto& t : nodes) t.join();
  RealNodeResult out = results[mgr_machine >= 0 ? mgr_machine : master];
  for (auto& [m, r] : results) {
    if (!r.ok && out.ok) {
      out.ok = false;
      out.error = cfg.atg->machine(m).name + ": " + r.error;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

LoadPattern LoadPattern::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("load pattern needs KIND:ARGS");
  const std::string kind = text.substr(0, colon);
  const std::string args = text.substr(colon + 1);
  LoadPattern p;
  try {
    if (kind == "static") {
      p.kind = Kind::fixed;
      p.jobs = std::stod(args);
    } else if (kind == "oscillate") {
      const auto comma = args.find(',');
      if (comma == std::string::npos) throw std::invalid_argument("oscillate needs PEAK,HALF_PERIOD_MS");
      p.kind = Kind::oscillate;
      p.jobs = std::stod(args.substr(0, comma));
      p.half_period_ms = std::stod(args.substr(comma + 1));
      if (!(p.half_period_ms > 0)) throw std::invalid_argument("oscillate half period must be positive");
    } else {
      throw std::invalid_argument("unknown load pattern '" + kind + "'");
    }
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception&) {
    throw std::invalid_argument("bad load pattern '" + text + "'");
  }
  if (!(p.jobs >= 0)) throw std::invalid_argument("job count must be non-negative");
  return p;
}

int LoadPattern::active_jobs(double t_ms) const {
  const int k = static_cast<int>(std::lround(jobs));
  if (kind == Kind::fixed) return k;
  return static_cast<long long>(std::floor(t_ms / half_period_ms)) % 2 == 0 ? k : 0;
}

std::uint64_t run_loadgen(const LoadgenOptions& options, const std::atomic<bool>& stop) {
  RealExecutor ex;
  std::atomic<std::uint64_t> done{0};
  const int slots = static_cast<int>(std::lround(options.pattern.jobs));
  auto finished = [&] { return stop || (options.duration_ms >= 0 && ex.now_ms() >= options.duration_ms); };
  std::vector<std::thread> jobs;
  for (int j = 0; j < slots; ++j) {
    jobs.emplace_back([&, j] {
      std::mt19937_64 rng(static_cast<std::uint64_t>(j) + 1);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      CVec data(static_cast<std::size_t>(options.fft_size));
      while (!finished()) {
        if (j >= options.pattern.active_jobs(ex.now_ms())) {
          ex.sleep_for(options.relaunch_delay_ms);
          continue;
        }
        for (auto& x : data) x = cplx(u(rng), 0.0);
        volatile double sink = std::abs(fft(data)[1]);
        (void)sink;
        ++done;
        ex.sleep_for(options.relaunch_delay_ms);
      }
    });
  }
  for (auto& t : jobs) t.join();
  return done;
}

}  // namespace qosmw
