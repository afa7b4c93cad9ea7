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

// qosmw command-line driver: run one application instance, the experiment
// benches, the real-host load generator, and configuration checks.

#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qosmw/atg.hpp"
#include "qosmw/harness.hpp"
#include "qosmw/probes.hpp"
#include "qosmw/real.hpp"

namespace {

using namespace qosmw;

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

AtgPtr load_config(const std::string& path) {
  if (path.empty()) return nullptr;
  try {
    return std::make_shared<const Atg>(load_atg_file(path));
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

LoadScenario load_scenario(const std::string& name) {
  try {
    return builtin_or_file_scenario(name);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

void print_partition(const std::vector<int>& p) {
  std::printf("partition:");
  for (int x : p) std::printf(" %d", x);
  std::printf("\n");
}

// ---------------------------------------------------------------------------

struct RunArgs {
  std::string config;
  std::string mode = "nonadaptive";
  int ports = 60;
  int vector_size = 500;
  int workers = 6;
  double period = 30000.0;
  bool sim = false;
  bool real = false;
  bool no_monitoring = false;
  std::string scenario = "idle";
  std::uint64_t seed = 1;
  int machine = -1;
  int base_port = 17000;
};

int run_sim(const RunArgs& a) {
  SimAppConfig cfg;
  cfg.atg = load_config(a.config);
  cfg.workers = a.workers;
  cfg.n = a.ports;
  cfg.s = a.vector_size;
  cfg.seed = a.seed;
  cfg.adaptive = a.mode == "adaptive";
  cfg.manager.adaptive = cfg.adaptive;
  cfg.monitoring = !a.no_monitoring;
  cfg.period_ms = a.period;
  cfg.scenario = load_scenario(a.scenario);
  const SimAppResult r = run_sim_app(cfg);
  if (!r.ok) {
    std::fprintf(stderr, "run failed: %s\n", r.error.c_str());
    return kExitRuntime;
  }
  std::printf("elapsed_virtual_s: %.3f\n", r.elapsed_ms / 1000.0);
  std::printf("tasks_started_s: %.3f\n", r.tasks_started_ms / 1000.0);
  print_partition(r.report.partition);
  std::printf("complete: %s\n", r.report.result.complete() ? "yes" : "no");
  return 0;
}

int report_node(const RealNodeResult& r) {
  if (r.elapsed_ms) std::printf("elapsed_wall_s: %.3f\n", *r.elapsed_ms / 1000.0);
  if (r.report) {
    print_partition(r.report->partition);
    std::printf("complete: %s\n", r.report->result.complete() ? "yes" : "no");
  }
  std::fflush(stdout);
  if (!r.ok) {
    std::fprintf(stderr, "run failed: %s\n", r.error.c_str());
    return kExitRuntime;
  }
  return 0;
}

int run_real(const RunArgs& a) {
  RealAppConfig cfg;
  cfg.atg = load_config(a.config);
  cfg.workers = a.workers;
  cfg.base_port = static_cast<std::uint16_t>(a.base_port);
  cfg.n = a.ports;
  cfg.s = a.vector_size;
  cfg.seed = a.seed;
  cfg.manager.adaptive = a.mode == "adaptive";
  cfg.monitoring = !a.no_monitoring;
  cfg.period_ms = a.period;
  cfg.atg = real_app_atg(cfg);
  if (a.machine >= 0) {
    if (a.machine >= cfg.atg->num_machines()) throw ConfigError("no machine " + std::to_string(a.machine));
    return report_node(run_real_node(cfg, a.machine));
  }
  // One child process per machine hosting tasks or the master.
  std::set<int> hosts{cfg.atg->master_rank()};
  for (const auto& t : cfg.atg->tasks()) hosts.insert(t.machine_rank);
  std::fflush(stdout);
  std::vector<pid_t> children;
  for (int m : hosts) {
    const pid_t pid = ::fork();
    if (pid < 0) {
      std::perror("fork");
      return kExitRuntime;
    }
    if (pid == 0) {
      const int rc = report_node(run_real_node(cfg, m));
      std::fflush(nullptr);
      ::_exit(rc);
    }
    children.push_back(pid);
  }
  int rc = 0;
  for (pid_t c : children) {
    int status = 0;
    ::waitpid(c, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) rc = kExitRuntime;
  }
  return rc;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string kind;
  bool sim = true;
  bool real = false;
  std::string scenario = "load1";
  std::uint64_t seed = 1;
  int reps = 3;
  double period = 30000.0;
  std::string out;
};

int write_report(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::fputs(text.c_str(), stdout);
    return 0;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) {
    std::fprintf(stderr, "cannot write %s\n", out.c_str());
    return kExitRuntime;
  }
  f << text;
  return f ? 0 : kExitRuntime;
}

int run_bench(const BenchArgs& a) {
  if (a.real) throw ConfigError("benches run in simulation only; use `run --real` for real-mode timings");
  if (a.kind == "adapt") {
    AdaptationConfig cfg;
    cfg.load = a.scenario;
    load_scenario(a.scenario);
    cfg.seed = a.seed;
    cfg.reps = a.reps;
    cfg.period_ms = a.period;
    return write_report(to_tsv(run_adaptation_experiment(cfg)), a.out);
  }
  OverheadConfig cfg;
  cfg.seed = a.seed;
  cfg.reps = a.reps;
  return write_report(to_tsv(run_overhead_experiment(cfg)), a.out);
}

// ---------------------------------------------------------------------------

std::atomic<bool> g_stop{false};

bool is_local_host(const std::string& host) {
  if (host == "localhost" || host == "127.0.0.1") return true;
  char buf[256] = {};
  return ::gethostname(buf, sizeof buf - 1) == 0 && host == buf;
}

int run_loadgen_cmd(const std::string& config, const std::vector<std::string>& targets, const std::string& pattern,
                    double duration) {
  LoadgenOptions o;
  try {
    o.pattern = LoadPattern::parse(pattern);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  o.duration_ms = duration;
  int local = targets.empty() ? 1 : 0;
  if (!targets.empty()) {
    AtgPtr atg = config.empty() ? std::make_shared<const Atg>(make_manager_worker_atg(6)) : load_config(config);
    for (const auto& t : targets) {
      const int r = atg->find_machine(t);
      if (r < 0) throw ConfigError("unknown target machine '" + t + "'");
      if (is_local_host(atg->machine(r).host)) ++local;
    }
    if (local == 0) {
      std::fprintf(stderr, "no target runs on this host; start loadgen on the target hosts\n");
      return 0;
    }
  }
  o.pattern.jobs *= local;
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  const auto jobs = run_loadgen(o, g_stop);
  std::printf("fft_jobs: %llu\n", static_cast<unsigned long long>(jobs));
  return 0;
}

int run_validate(const std::string& config, const std::string& scenario) {
  AtgPtr atg = config.empty() ? std::make_shared<const Atg>(make_manager_worker_atg(6)) : load_config(config);
  if (!scenario.empty()) {
    const LoadScenario sc = load_scenario(scenario);
    for (const auto& [name, load] : sc.loads) {
      if (atg->find_machine(name) < 0) throw ConfigError("scenario names unknown machine '" + name + "'");
    }
  }
  std::printf("ok: %d machines, %d tasks, %d links, master %s\n", atg->num_machines(), atg->num_tasks(),
              static_cast<int>(atg->links().size()), atg->machine(atg->master_rank()).name.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"QoS monitoring middleware and circuit-simulation application"};
  app.require_subcommand(1);

  RunArgs ra;
  auto* run = app.add_subcommand("run", "Launch one application instance");
  run->add_option("--config", ra.config, "Task-graph file (default: manager plus --workers workers)");
  run->add_option("--mode", ra.mode, "adaptive or nonadaptive")->check(CLI::IsMember({"adaptive", "nonadaptive"}));
  run->add_option("--ports", ra.ports, "Circuit ports N")->check(CLI::PositiveNumber);
  run->add_option("--vector-size", ra.vector_size, "Samples per vector S")->check(CLI::PositiveNumber);
  run->add_option("--workers", ra.workers, "Workers when no --config is given")->check(CLI::PositiveNumber);
  run->add_option("--period", ra.period, "Monitoring period, ms")->check(CLI::PositiveNumber);
  auto* sim_flag = run->add_flag("--sim", ra.sim, "Simulated cluster (default)");
  run->add_flag("--real", ra.real, "Real processes on this host")->excludes(sim_flag);
  run->add_flag("--no-monitoring", ra.no_monitoring, "Leave QoS monitoring off");
  run->add_option("--scenario", ra.scenario, "idle, load1, load2, or a scenario file (simulation)");
  run->add_option("--seed", ra.seed, "Circuit seed");
  run->add_option("--machine", ra.machine, "Real mode: run only this machine rank");
  run->add_option("--base-port", ra.base_port, "Real mode: first port of the generated task graph");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Experiment drivers");
  bench->add_option("kind", ba.kind, "adapt or overhead")->required()->check(CLI::IsMember({"adapt", "overhead"}));
  auto* bsim = bench->add_flag("--sim", ba.sim, "Simulated cluster (default)");
  bench->add_flag("--real", ba.real, "Not supported for benches")->excludes(bsim);
  bench->add_option("--scenario", ba.scenario, "Load for `adapt`: load1, load2, idle, or a file");
  bench->add_option("--seed", ba.seed, "First seed");
  bench->add_option("--reps", ba.reps, "Repetitions per cell")->check(CLI::PositiveNumber);
  bench->add_option("--period", ba.period, "Monitoring period for `adapt`, ms")->check(CLI::PositiveNumber);
  bench->add_option("--out", ba.out, "TSV output file (default stdout)");

  std::string lg_config, lg_pattern;
  std::vector<std::string> lg_targets;
  double lg_duration = -1.0;
  auto* loadgen = app.add_subcommand("loadgen", "Background FFT load on this host");
  loadgen->add_option("--config", lg_config, "Task-graph file resolving --targets");
  loadgen->add_option("--targets", lg_targets, "Machine names to load")->delimiter(',');
  loadgen->add_option("--pattern", lg_pattern, "static:K or oscillate:PEAK,HALF_PERIOD_MS")->required();
  loadgen->add_option("--duration", lg_duration, "Run time in ms (default until interrupted)");

  std::string v_config, v_scenario;
  auto* validate = app.add_subcommand("validate", "Check a task graph and scenario");
  validate->add_option("--config", v_config, "Task-graph file");
  validate->add_option("--scenario", v_scenario, "Scenario name or file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return ra.real ? run_real(ra) : run_sim(ra);
    if (*bench) return run_bench(ba);
    if (*loadgen) return run_loadgen_cmd(lg_config, lg_targets, lg_pattern, lg_duration);
    if (*validate) return run_validate(v_config, v_scenario);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
