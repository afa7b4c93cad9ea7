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

#include "qosmw/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "qosmw/qos_service.hpp"

namespace qosmw {

SimDeployment::SimDeployment(AtgPtr atg, std::vector<SimMachineConfig> machines, ManagerConfig manager_config,
                             SimLinkConfig link)
    : atg_(std::move(atg)) {
  if (!atg_) throw std::invalid_argument("deployment needs a task graph");
  if (static_cast<int>(machines.size()) != atg_->num_machines()) {
    throw std::invalid_argument("one machine config per task-graph machine");
  }
  cluster_ = std::make_unique<SimCluster>(kernel_, std::move(machines), link);
  executor_ = std::make_unique<SimExecutor>(*cluster_);
  sim_transport_ = std::make_unique<SimTransport>(*cluster_);
  transport_ = std::make_unique<RecordingTransport>(*sim_transport_, [this] { return kernel_.now_ms(); });
  providers_.resize(static_cast<std::size_t>(atg_->num_machines()));

  std::set<int> hosts{atg_->master_rank()};
  for (const auto& t : atg_->tasks()) hosts.insert(t.machine_rank);
  for (int m : hosts) {
    providers_[static_cast<std::size_t>(m)] =
        std::make_unique<SimProbeProvider>(m, *cluster_, *transport_, *executor_);
    QosManager& mgr = managers_.launch(m, [&] {
      return std::make_unique<QosManager>(atg_, m, manager_config, *transport_, *executor_,
                                          *providers_[static_cast<std::size_t>(m)]);
    });
    sim_transport_->bind(m, [&mgr](const Frame& f) { return mgr.serve_request(f); });
  }

  mailboxes_ = std::make_unique<MailboxSet>(*executor_);
  messages_ = std::make_unique<SimMessageNetwork>(*cluster_, *atg_, *mailboxes_,
                                                  [this](int t) { return task_alive(t); });
}

SimDeployment::~SimDeployment() {
  // Unwind every process while the objects it uses still exist.
  kernel_.shutdown();
}

QosManager& SimDeployment::manager(int machine_rank) {
  QosManager* m = managers_.find(machine_rank);
  if (!m) throw QosError("no manager on machine " + std::to_string(machine_rank));
  return *m;
}

void SimDeployment::start_monitoring(double at_ms) {
  for (QosManager* m : managers_.all()) {
    manager_pids_.push_back(cluster_->spawn_on(m->machine_rank(), "qosmgr@" + atg_->machine(m->machine_rank()).name,
                                               [m] { m->run_loop(); }, at_ms));
  }
}

void SimDeployment::stop_monitoring() {
  for (QosManager* m : managers_.all()) m->shutdown();
  kernel_.run([this] { return monitoring_processes() == 0; });
}

int SimDeployment::monitoring_processes() const {
  int n = 0;
  for (auto pid : manager_pids_) n += kernel_.alive(pid) ? 1 : 0;
  return n;
}

sim::Pid SimDeployment::spawn_task(int task_rank, std::function<void(QosService&)> body, double start_ms) {
  const TaskDecl& t = atg_->task(task_rank);
  QosManager& mgr = manager(t.machine_rank);
  const sim::Pid pid = cluster_->spawn_on(
      t.machine_rank, t.variable_name,
      [this, &mgr, task_rank, body = std::move(body)] {
        QosService qos(mgr, task_rank);
        qos.report_running(kernel_.current());
        body(qos);
        try {
          qos.report_completed();
        } catch (const QosError&) {
        }
      },
      start_ms);
  task_pids_[task_rank] = pid;
  return pid;
}

std::optional<sim::Pid> SimDeployment::task_pid(int task_rank) const {
  auto it = task_pids_.find(task_rank);
  if (it == task_pids_.end()) return std::nullopt;
  return it->second;
}

bool SimDeployment::task_alive(int task_rank) const {
  auto pid = task_pid(task_rank);
  // Not yet started counts as alive: messages wait in its mailbox.
  return !pid || kernel_.alive(*pid);
}

// ---------------------------------------------------------------------------

namespace {

int find_manager_task(const Atg& atg) {
  for (const auto& t : atg.tasks()) {
    if (t.component_id == "npc_manager") return t.rank;
  }
  return -1;
}

}  // namespace

SimAppResult run_sim_app(const SimAppConfig& cfg) {
  SimAppResult res;
  AtgPtr atg = cfg.atg ? cfg.atg : std::make_shared<const Atg>(make_manager_worker_atg(cfg.workers));
  const int mgr_task = find_manager_task(*atg);
  if (mgr_task < 0) {
    res.error = "task graph has no npc_manager task";
    return res;
  }
  const int num_workers = atg->task(mgr_task).num_ports;
  std::vector<int> worker_tasks;
  for (int p = 0; p < num_workers; ++p) worker_tasks.push_back(atg->port_peer(mgr_task, p).task_rank);

  std::vector<SimMachineConfig> machines;
  for (const auto& m : atg->machines()) {
    SimMachineConfig mc;
    mc.name = m.name;
    mc.cpu_speed_mhz = cfg.cpu_speed_mhz;
    mc.load = cfg.scenario.for_machine(m.name);
    machines.push_back(std::move(mc));
  }
  ManagerConfig mcfg;
  mcfg.period_ms = cfg.period_ms;
  mcfg.enabled = cfg.monitoring;
  mcfg.cycle_cpu_ms = cfg.cycle_cpu_ms;
  mcfg.launch_cpu_ms = cfg.launch_cpu_ms;

  SimDeployment d(atg, std::move(machines), mcfg, cfg.link);
  auto& kernel = d.kernel();
  const CircuitSpec spec = make_circuit(cfg.n, cfg.s, cfg.seed, cfg.conjugate_symmetric);

  bool launched = false;
  std::optional<double> manager_done;

  auto launch_tasks = [&] {
    res.tasks_started_ms = kernel.now_ms();
    const double t0 = kernel.now_ms();
    for (int w = 0; w < num_workers; ++w) {
      const int task = worker_tasks[static_cast<std::size_t>(w)];
      WorkerOptions wo = cfg.worker;
      if (cfg.fault && cfg.fault->worker == w) {
        const WorkerPhase at = cfg.fault->at;
        auto prev = wo.on_phase;
        wo.on_phase = [&kernel, at, prev](WorkerPhase p) {
          if (prev) prev(p);
          if (p == at) kernel.kill(kernel.current());
        };
      }
      d.spawn_task(
          task,
          [&d, atg, task, wo](QosService& qos) {
            Port port(*atg, task, 0, d.messages(), d.mailboxes(), [&qos] {
              return qos.peer_task_state(0) == task_state_code(TaskPhase::dead);
            });
            try {
              run_worker(port, &qos, d.executor(), atg->task(task).machine_rank, wo);
            } catch (const WorkerAbort&) {
            }
          },
          t0);
    }
    d.spawn_task(
        mgr_task,
        [&](QosService& qos) {
          std::vector<Port> ports;
          for (int p = 0; p < num_workers; ++p) {
            ports.emplace_back(*atg, mgr_task, p, d.messages(), d.mailboxes(), [&qos, p] {
              return qos.peer_task_state(p) == task_state_code(TaskPhase::dead);
            });
          }
          res.report = run_manager(spec, ports, qos, d.executor(), cfg.manager);
          manager_done = kernel.now_ms();
        },
        t0);
    launched = true;
  };

  if (cfg.monitoring) {
    d.start_monitoring();
    QosManager& master = d.manager(atg->master_rank());
    d.cluster().spawn_on(atg->master_rank(), "launcher", [&] {
      // Tasks start once the first snapshot exists.
      d.executor().wait_until([&] { return master.global()->stamp() >= 1; }, -1.0);
      launch_tasks();
    });
  } else {
    launch_tasks();
  }

  auto all_done = [&] {
    if (!launched) return false;
    for (int t : worker_tasks) {
      if (!kernel.finished(*d.task_pid(t))) return false;
    }
    return kernel.finished(*d.task_pid(mgr_task));
  };
  const auto rr = kernel.run(all_done, cfg.time_limit_ms);
  const double finished_at = kernel.now_ms();
  if (rr == sim::Kernel::RunResult::stopped) d.stop_monitoring();
  res.managers_left = d.monitoring_processes();

  if (!manager_done) {
    res.error = rr == sim::Kernel::RunResult::time_limit ? "time limit reached" : "manager task did not finish";
  }
  res.elapsed_ms = manager_done.value_or(finished_at);
  res.failures = kernel.failures();
  for (QosManager* m : d.managers()) {
    res.cycle_starts[m->machine_rank()] = m->cycle_starts();
    for (const auto& iv : m->measure_log()) res.measurements.push_back(iv);
    if (m->global()) res.final_global_stamp = m->global()->stamp();
  }
  std::sort(res.measurements.begin(), res.measurements.end(),
            [](const MeasureInterval& a, const MeasureInterval& b) { return a.begin_ms < b.begin_ms; });
  res.traffic = d.transport().records();
  res.events = kernel.events_dispatched();
  if (res.error.empty() && !res.report.error.empty()) res.error = res.report.error;
  if (res.error.empty() && !res.failures.empty()) res.error = "process failure: " + res.failures.front();
  res.ok = res.error.empty();
  return res;
}

LoadScenario builtin_or_file_scenario(const std::string& name) {
  if (name.empty() || name == "idle") return {};
  if (name == "load1") return parse_scenario("load m4 static 2\nload m5 static 2\nload m6 static 2\n");
  if (name == "load2") {
    return parse_scenario(
        "load m3 static 2\nload m4 static 2\n"
        "load m5 oscillate 2 6000\nload m6 oscillate 2 6000\n");
  }
  return load_scenario_file(name);
}

// ---------------------------------------------------------------------------
// Experiments

double Cell::diff_pct() const { return no_ms > 0.0 ? (no_ms - with_ms) / no_ms * 100.0 : 0.0; }

const Cell& AdaptationReport::cell(int n, int s) const {
  for (const auto& c : cells) {
    if (c.n == n && c.s == s) return c;
  }
  throw std::out_of_range("no cell for N=" + std::to_string(n) + " S=" + std::to_string(s));
}

namespace {

struct Averaged {
  double ms = 0.0;
  bool ok = true;
};

Averaged average_runs(SimAppConfig cfg, int reps, std::uint64_t seed) {
  Averaged a;
  for (int r = 0; r < reps; ++r) {
    cfg.seed = seed + static_cast<std::uint64_t>(r);
    const SimAppResult res = run_sim_app(cfg);
    a.ok = a.ok && res.ok;
    a.ms += res.elapsed_ms;
  }
  a.ms /= std::max(reps, 1);
  return a;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string secs(double ms, bool ok) { return ok ? fmt("%.3f", ms / 1000.0) : "ERR"; }

}  // namespace

AdaptationReport run_adaptation_experiment(const AdaptationConfig& config) {
  AdaptationReport rep;
  rep.load = config.load;
  rep.reps = config.reps;
  rep.seed = config.seed;
  rep.ns = config.ns;
  rep.ss = config.ss;
  SimAppConfig base = config.base;
  base.scenario = builtin_or_file_scenario(config.load);
  base.worker.compute = false;
  for (int n : config.ns) {
    for (int s : config.ss) {
      Cell c;
      c.n = n;
      c.s = s;
      SimAppConfig no = base;
      no.n = n;
      no.s = s;
      no.adaptive = false;
      no.manager.adaptive = false;
      no.monitoring = false;
      const Averaged a = average_runs(no, config.reps, config.seed);
      SimAppConfig with = no;
      with.adaptive = true;
      with.manager.adaptive = true;
      with.monitoring = true;
      with.period_ms = config.period_ms;
      const Averaged b = average_runs(with, config.reps, config.seed);
      c.no_ms = a.ms;
      c.no_ok = a.ok;
      c.with_ms = b.ms;
      c.with_ok = b.ok;
      rep.cells.push_back(c);
    }
  }
  return rep;
}

std::string to_tsv(const AdaptationReport& r) {
  std::ostringstream os;
  os << "# adaptation\tload=" << r.load << "\treps=" << r.reps << "\tseed=" << r.seed << "\n";
  os << "metric\tN";
  for (int s : r.ss) os << "\tS=" << s;
  os << "\n";
  const char* metrics[] = {"no_qos_s", "with_qos_s", "diff_s", "diff_pct"};
  for (int mi = 0; mi < 4; ++mi) {
    for (int n : r.ns) {
      os << metrics[mi] << "\t" << n;
      for (int s : r.ss) {
        const Cell& c = r.cell(n, s);
        const bool ok = c.no_ok && c.with_ok;
        os << "\t";
        switch (mi) {
          case 0: os << secs(c.no_ms, c.no_ok); break;
          case 1: os << secs(c.with_ms, c.with_ok); break;
          case 2: os << secs(c.no_ms - c.with_ms, ok); break;
          default: os << (ok ? fmt("%.1f", c.diff_pct()) : "ERR"); break;
        }
      }
      os << "\n";
    }
  }
  return os.str();
}

double OverheadReport::diff_pct(double period_ms, int s) const {
  const double off = off_ms.at(s);
  const double on = on_ms.at({period_ms, s});
  return off > 0.0 ? (off - on) / off * 100.0 : 0.0;
}

OverheadReport run_overhead_experiment(const OverheadConfig& config) {
  OverheadReport rep;
  rep.n = config.n;
  rep.reps = config.reps;
  rep.seed = config.seed;
  rep.ss = config.ss;
  rep.periods_ms = config.periods_ms;
  SimAppConfig base = config.base;
  base.n = config.n;
  base.adaptive = false;
  base.manager.adaptive = false;
  base.manager.fault_guard = false;
  base.worker.compute = false;
  for (int s : config.ss) {
    SimAppConfig off = base;
    off.s = s;
    off.monitoring = false;
    const Averaged a = average_runs(off, config.reps, config.seed);
    rep.off_ms[s] = a.ms;
    rep.off_ok[s] = a.ok;
    for (double p : config.periods_ms) {
      SimAppConfig on = off;
      on.monitoring = true;
      on.period_ms = p;
      const Averaged b = average_runs(on, config.reps, config.seed);
      rep.on_ms[{p, s}] = b.ms;
      rep.on_ok[{p, s}] = b.ok;
    }
  }
  return rep;
}

std::string to_tsv(const OverheadReport& r) {
  std::ostringstream os;
  os << "# overhead\tN=" << r.n << "\treps=" << r.reps << "\tseed=" << r.seed << "\n";
  os << "metric\tperiod_s";
  for (int s : r.ss) os << "\tS=" << s;
  os << "\n";
  os << "off_s\t-";
  for (int s : r.ss) os << "\t" << secs(r.off_ms.at(s), r.off_ok.at(s));
  os << "\n";
  for (double p : r.periods_ms) {
    os << "on_s\t" << fmt("%g", p / 1000.0);
    for (int s : r.ss) os << "\t" << secs(r.on_ms.at({p, s}), r.on_ok.at({p, s}));
    os << "\n";
  }
  for (double p : r.periods_ms) {
    os << "diff_pct\t" << fmt("%g", p / 1000.0);
    for (int s : r.ss) {
      const bool ok = r.off_ok.at(s) && r.on_ok.at({p, s});
      os << "\t" << (ok ? fmt("%.1f", r.diff_pct(p, s)) : "ERR");
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace qosmw
