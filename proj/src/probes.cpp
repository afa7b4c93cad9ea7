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

#include "qosmw/probes.hpp"

#include <sys/utsname.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace qosmw {

double effective_speed(int num_cpus, double workload, double min_cpu_speed_mhz) {
  if (num_cpus < 1) throw std::invalid_argument("num_cpus must be >= 1");
  if (!(workload >= 0.0)) throw std::invalid_argument("workload must be >= 0");
  if (!(min_cpu_speed_mhz > 0.0)) throw std::invalid_argument("cpu speed must be > 0");
  const double contenders = 1.0 + workload;
  const double factor = contenders <= num_cpus ? 1.0 : num_cpus / contenders;
  return factor * min_cpu_speed_mhz;
}

MachState machine_state(ProbeProvider& provider, int machine_rank, const PingPolicy& policy) {
  for (int attempt = 0; attempt < std::max(1, policy.attempts); ++attempt) {
    if (attempt > 0) provider.pause_ms(policy.gap_ms);
    if (provider.ping(machine_rank, policy.timeout_ms)) return MachState::up;
  }
  return MachState::down;
}

MachineAttributes probe_machine(ProbeProvider& provider, int machine_rank, const MachineAttributes& previous,
                                const PingPolicy& policy) {
  MachineAttributes down = previous;
  down.mach_state = MachState::down;
  if (machine_state(provider, machine_rank, policy) == MachState::down) return down;
  try {
    MachineAttributes a;
    a.os_type = provider.os_type();
    a.cpu_speed_mhz = provider.cpu_speed_mhz();
    a.num_cpus = provider.num_cpus();
    a.workload = std::max(0.0, provider.workload());
    a.free_ram_bytes = provider.free_ram_bytes();
    a.free_swap_bytes = provider.free_swap_bytes();
    a.effective_speed_mhz = effective_speed(a.num_cpus, a.workload, a.cpu_speed_mhz);
    a.mach_state = MachState::up;
    return a;
  } catch (const ProbeError&) {
    return down;
  } catch (const std::invalid_argument&) {
    return down;
  }
}

TaskPhase task_state(ProbeProvider& provider, const TaskState& recorded, int machine_rank, const PingPolicy& policy) {
  if (recorded.phase != TaskPhase::running) return recorded.phase;
  if (machine_state(provider, machine_rank, policy) == MachState::down) return TaskPhase::dead;
  auto pids = provider.list_pids(machine_rank);
  // An unanswered listing on a reachable machine is not evidence of death.
  if (!pids) return TaskPhase::running;
  return pids->count(recorded.pid) ? TaskPhase::running : TaskPhase::dead;
}

// ---------------------------------------------------------------------------

WireProbeProvider::WireProbeProvider(int own_rank, Transport& transport, Executor& executor)
    : own_rank_(own_rank), transport_(transport), executor_(executor) {}

bool WireProbeProvider::ping(int machine_rank, double timeout_ms) {
  if (machine_rank == own_rank_) return true;
  auto reply = transport_.request(own_rank_, machine_rank, Frame{opcode::kPing, {}}, timeout_ms);
  return reply && reply->opcode == opcode::kPing;
}

std::optional<std::set<std::int64_t>> WireProbeProvider::list_pids(int machine_rank) {
  if (machine_rank == own_rank_) return local_pids();
  auto reply = transport_.request(own_rank_, machine_rank, Frame{opcode::kListPids, {}}, 1000.0);
  if (!reply || reply->opcode != opcode::kListPids) return std::nullopt;
  try {
    return decode_pids(to_string(reply->payload));
  } catch (const WireError&) {
    return std::nullopt;
  }
}

void WireProbeProvider::pause_ms(double ms) { executor_.sleep_for(ms); }

void PidRegistry::add(std::int64_t pid) {
  std::lock_guard lk(mu_);
  pids_.insert(pid);
}

void PidRegistry::remove(std::int64_t pid) {
  std::lock_guard lk(mu_);
  pids_.erase(pid);
}

std::set<std::int64_t> PidRegistry::all() const {
  std::lock_guard lk(mu_);
  return pids_;
}

OsProbeProvider::OsProbeProvider(int own_rank, Transport& transport, Executor& executor, const PidRegistry& registry)
    : WireProbeProvider(own_rank, transport, executor), registry_(registry) {}

std::string OsProbeProvider::os_type() {
  utsname u{};
  if (::uname(&u) != 0) throw ProbeError("uname failed");
  return u.sysname;
}

double OsProbeProvider::cpu_speed_mhz() {
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  double min_mhz = std::numeric_limits<double>::infinity();
  while (std::getline(in, line)) {
    if (line.rfind("cpu MHz", 0) == 0) {
      auto colon = line.find(':');
      if (colon != std::string::npos) min_mhz = std::min(min_mhz, std::strtod(line.c_str() + colon + 1, nullptr));
    }
  }
  if (std::isfinite(min_mhz) && min_mhz > 0) return min_mhz;
  std::ifstream freq("/sys/devices/system/cpu/cpu0/cpufreq/cpuinfo_max_freq");
  double khz = 0;
  if (freq >> khz && khz > 0) return khz / 1000.0;
  throw ProbeError("cpu speed unavailable");
}

int OsProbeProvider::num_cpus() {
  long n = ::sysconf(_SC_NPROCESSORS_ONLN);
  if (n < 1) throw ProbeError("cpu count unavailable");
  return static_cast<int>(n);
}

double OsProbeProvider::workload() {
  std::ifstream in("/proc/loadavg");
  double one_minute = 0;
  if (!(in >> one_minute)) throw ProbeError("/proc/loadavg unreadable");
  return one_minute;
}

namespace {

std::int64_t meminfo_bytes(const std::string& key, const std::string& fallback = {}) {
  std::ifstream in("/proc/meminfo");
  std::string line;
  std::optional<std::int64_t> primary, secondary;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string k;
    std::int64_t kb = 0;
    ls >> k >> kb;
    if (k == key + ":") primary = kb * 1024;
    if (!fallback.empty() && k == fallback + ":") secondary = kb * 1024;
  }
  if (primary) return *primary;
  if (secondary) return *secondary;
  throw ProbeError("/proc/meminfo lacks " + key);
}

}  // namespace

std::int64_t OsProbeProvider::free_ram_bytes() { return meminfo_bytes("MemAvailable", "MemFree"); }

std::int64_t OsProbeProvider::free_swap_bytes() { return meminfo_bytes("SwapFree"); }

std::set<std::int64_t> OsProbeProvider::local_pids() {
  std::set<std::int64_t> out;
  for (auto pid : registry_.all()) {
    std::error_code ec;
    if (std::filesystem::exists("/proc/self/task/" + std::to_string(pid), ec)) out.insert(pid);
  }
  return out;
}

// ---------------------------------------------------------------------------

LoadSchedule LoadSchedule::idle() { return fixed(0.0); }

LoadSchedule LoadSchedule::fixed(double workload) {
  if (!(workload >= 0.0)) throw std::invalid_argument("workload must be >= 0");
  LoadSchedule s;
  s.kind_ = Kind::fixed;
  s.value_ = workload;
  return s;
}

LoadSchedule LoadSchedule::oscillate(double peak, double half_period_ms, double phase_ms) {
  if (!(peak >= 0.0)) throw std::invalid_argument("peak must be >= 0");
  if (!(half_period_ms > 0.0)) throw std::invalid_argument("period must be > 0");
  LoadSchedule s;
  s.kind_ = Kind::oscillate;
  s.value_ = peak;
  s.half_period_ms_ = half_period_ms;
  s.phase_ms_ = phase_ms;
  return s;
}

LoadSchedule LoadSchedule::steps(std::vector<std::pair<double, double>> steps) {
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!(steps[i].second >= 0.0)) throw std::invalid_argument("workload must be >= 0");
    if (i > 0 && !(steps[i].first > steps[i - 1].first)) {
      throw std::invalid_argument("load step times must be strictly increasing");
    }
  }
  LoadSchedule s;
  s.kind_ = Kind::steps;
  s.steps_ = std::move(steps);
  return s;
}

double LoadSchedule::at(double t_ms) const {
  switch (kind_) {
    case Kind::fixed:
      return value_;
    case Kind::oscillate: {
      const double local = t_ms - phase_ms_;
      const auto half = static_cast<long long>(std::floor(local / half_period_ms_));
      return (half % 2 == 0) ? value_ : 0.0;
    }
    case Kind::steps: {
      double v = 0.0;
      for (const auto& [t, value] : steps_) {
        if (t <= t_ms) v = value;
      }
      return v;
    }
  }
  return 0.0;
}

std::optional<double> LoadSchedule::next_change_after(double t_ms) const {
  switch (kind_) {
    case Kind::fixed:
      return std::nullopt;
    case Kind::oscillate: {
      const double local = t_ms - phase_ms_;
      const double half = std::floor(local / half_period_ms_) + 1.0;
      return phase_ms_ + half * half_period_ms_;
    }
    case Kind::steps:
      for (const auto& [t, value] : steps_) {
        if (t > t_ms) return t;
      }
      return std::nullopt;
  }
  return std::nullopt;
}

LoadSchedule LoadScenario::for_machine(const std::string& name) const {
  auto it = loads.find(name);
  return it == loads.end() ? LoadSchedule::idle() : it->second;
}

LoadScenario parse_scenario(std::string_view text) {
  LoadScenario sc;
  std::map<std::string, std::vector<std::pair<double, double>>> steps;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument("scenario line " + std::to_string(line_no) + ": " + what);
  };
  auto num = [&](const std::string& s) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0' || !std::isfinite(v)) fail("bad number '" + s + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::vector<std::string> toks;
    for (std::string t; ls >> t;) toks.push_back(t);
    if (toks.empty()) continue;
    if (toks[0] != "load" || toks.size() < 4) fail("expected: load <machine> static|oscillate|at ...");
    const std::string& machine = toks[1];
    const std::string& kind = toks[2];
    try {
      if (kind == "static") {
        if (toks.size() != 4) fail("static takes one value");
        if (sc.loads.count(machine) || steps.count(machine)) fail("machine '" + machine + "' already has a load");
        sc.loads.emplace(machine, LoadSchedule::fixed(num(toks[3])));
      } else if (kind == "oscillate") {
        if (toks.size() != 5 && toks.size() != 6) fail("oscillate takes <peak> <half_period_ms> [phase_ms]");
        if (sc.loads.count(machine) || steps.count(machine)) fail("machine '" + machine + "' already has a load");
        const double phase = toks.size() == 6 ? num(toks[5]) : 0.0;
        sc.loads.emplace(machine, LoadSchedule::oscillate(num(toks[3]), num(toks[4]), phase));
      } else if (kind == "at") {
        if (toks.size() != 5) fail("at takes <t_ms> <value>");
        if (sc.loads.count(machine)) fail("machine '" + machine + "' already has a load");
        steps[machine].emplace_back(num(toks[3]), num(toks[4]));
      } else {
        fail("unknown load kind '" + kind + "'");
      }
    } catch (const std::invalid_argument& e) {
      const std::string what = e.what();
      if (what.rfind("scenario line", 0) == 0) throw;
      fail(what);
    }
  }
  for (auto& [machine, st] : steps) {
    try {
      sc.loads.emplace(machine, LoadSchedule::steps(st));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("scenario machine '" + machine + "': " + e.what());
    }
  }
  return sc;
}

LoadScenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scenario '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

}  // namespace qosmw
