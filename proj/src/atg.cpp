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

#include "qosmw/atg.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace qosmw {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

[[noreturn]] void fail_line(int line_no, const std::string& what) {
  throw AtgError("syntax error at line " + std::to_string(line_no) + ": " + what);
}

long parse_int(std::string_view s, int line_no, const char* what) {
  long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    fail_line(line_no, std::string("bad integer for ") + what + ": '" + std::string(s) + "'");
  }
  return v;
}

std::string_view expect_kv(std::string_view tok, std::string_view key, int line_no) {
  if (tok.size() <= key.size() || tok.substr(0, key.size()) != key || tok[key.size()] != '=') {
    fail_line(line_no, "expected " + std::string(key) + "=<value>, got '" + std::string(tok) + "'");
  }
  return tok.substr(key.size() + 1);
}

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return c != '.' && c != '=' && c != '#' && c != ' ' && c != '\t';
  });
}

}  // namespace

Atg::Atg(std::vector<MachineDecl> machines, std::vector<TaskDecl> tasks, std::vector<LinkDecl> links)
    : machines_(std::move(machines)), tasks_(std::move(tasks)), links_(std::move(links)) {
  validate();
}

void Atg::validate() {
  if (machines_.empty()) throw AtgError("task graph declares no machines");
  std::set<std::string> names;
  master_rank_ = -1;
  for (std::size_t i = 0; i < machines_.size(); ++i) {
    const auto& m = machines_[i];
    if (m.rank != static_cast<int>(i)) throw AtgError("duplicate or non-dense machine rank " + std::to_string(m.rank));
    if (!names.insert(m.name).second) throw AtgError("duplicate machine name '" + m.name + "'");
    if (m.is_master) {
      if (master_rank_ >= 0) throw AtgError("multiple master machines");
      master_rank_ = m.rank;
    }
  }
  if (master_rank_ < 0) throw AtgError("no master machine");

  std::set<std::string> task_names;
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    const auto& t = tasks_[i];
    if (t.rank != static_cast<int>(i)) throw AtgError("duplicate or non-dense task rank " + std::to_string(t.rank));
    if (!task_names.insert(t.variable_name).second) throw AtgError("duplicate task name '" + t.variable_name + "'");
    if (t.machine_rank < 0 || t.machine_rank >= num_machines()) {
      throw AtgError("dangling reference: task '" + t.variable_name + "' names an unknown machine");
    }
    if (t.num_ports < 0) throw AtgError("task '" + t.variable_name + "' has a negative port count");
  }

  port_link_.assign(tasks_.size(), {});
  for (std::size_t i = 0; i < tasks_.size(); ++i) port_link_[i].assign(tasks_[i].num_ports, -1);

  for (std::size_t li = 0; li < links_.size(); ++li) {
    auto& l = links_[li];
    if (l.link_id != static_cast<int>(li)) throw AtgError("duplicate or non-dense link id " + std::to_string(l.link_id));
    for (const Endpoint& e : {l.a, l.b}) {
      if (e.task_rank < 0 || e.task_rank >= num_tasks() || e.port_index < 0 ||
          e.port_index >= tasks_[e.task_rank].num_ports) {
        throw AtgError("dangling reference: link " + std::to_string(l.link_id) + " endpoint " +
                       std::to_string(e.task_rank) + "." + std::to_string(e.port_index));
      }
      int& slot = port_link_[e.task_rank][e.port_index];
      if (slot >= 0) {
        throw AtgError("port " + tasks_[e.task_rank].variable_name + "." + std::to_string(e.port_index) +
                       " appears in more than one link");
      }
      slot = l.link_id;
    }
    if (l.a.task_rank == l.b.task_rank) {
      throw AtgError("self-link on task '" + tasks_[l.a.task_rank].variable_name + "' is not allowed");
    }
  }
  for (const auto& t : tasks_) {
    for (int p = 0; p < t.num_ports; ++p) {
      if (port_link_[t.rank][p] < 0) {
        throw AtgError("task '" + t.variable_name + "' declares " + std::to_string(t.num_ports) +
                       " ports but port " + std::to_string(p) + " is not linked");
      }
    }
  }
}

const MachineDecl& Atg::machine(int rank) const {
  if (rank < 0 || rank >= num_machines()) throw AtgError("unknown machine rank " + std::to_string(rank));
  return machines_[rank];
}

const TaskDecl& Atg::task(int rank) const {
  if (rank < 0 || rank >= num_tasks()) throw AtgError("unknown task rank " + std::to_string(rank));
  return tasks_[rank];
}

const LinkDecl& Atg::link(int link_id) const {
  if (link_id < 0 || link_id >= static_cast<int>(links_.size())) {
    throw AtgError("unknown link id " + std::to_string(link_id));
  }
  return links_[link_id];
}

std::vector<int> Atg::tasks_on(int machine_rank) const {
  std::vector<int> out;
  for (const auto& t : tasks_) {
    if (t.machine_rank == machine_rank) out.push_back(t.rank);
  }
  return out;
}

int Atg::launcher_task(int machine_rank) const {
  for (const auto& t : tasks_) {
    if (t.machine_rank == machine_rank) return t.rank;
  }
  return -1;
}

std::vector<int> Atg::links_touching(int machine_rank) const {
  std::vector<int> out;
  for (const auto& l : links_) {
    if (machine_of(l.a.task_rank) == machine_rank || machine_of(l.b.task_rank) == machine_rank) {
      out.push_back(l.link_id);
    }
  }
  return out;
}

int Atg::find_machine(std::string_view name) const {
  for (const auto& m : machines_) {
    if (m.name == name) return m.rank;
  }
  return -1;
}

int Atg::find_task(std::string_view variable_name) const {
  for (const auto& t : tasks_) {
    if (t.variable_name == variable_name) return t.rank;
  }
  return -1;
}

bool Atg::port_connected(int task_rank, int port_index) const {
  if (task_rank < 0 || task_rank >= num_tasks()) return false;
  if (port_index < 0 || port_index >= tasks_[task_rank].num_ports) return false;
  return port_link_[task_rank][port_index] >= 0;
}

PortPeer Atg::port_peer(int task_rank, int port_index) const {
  if (!port_connected(task_rank, port_index)) throw AtgError("port has no peer");
  const LinkDecl& l = links_[port_link_[task_rank][port_index]];
  const Endpoint self{task_rank, port_index};
  const Endpoint other = (l.a == self) ? l.b : l.a;
  return PortPeer{other.task_rank, other.port_index, machine_of(other.task_rank), l.link_id};
}

Atg parse_atg(std::string_view text) {
  std::vector<MachineDecl> machines;
  std::vector<TaskDecl> tasks;
  std::vector<LinkDecl> links;
  std::map<std::string, int, std::less<>> machine_by_name;
  std::map<std::string, int, std::less<>> task_by_name;
  // task machine names are resolved after all machines are known
  std::vector<std::pair<std::string, int>> pending_task_machine;
  struct PendingLink {
    std::string a_task, b_task;
    long a_port, b_port;
    int line;
  };
  std::vector<PendingLink> pending_links;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto toks = split_ws(line);
    if (toks.empty()) {
      if (nl == text.size()) break;
      continue;
    }

    if (toks[0] == "machine") {
      if (toks.size() < 4 || toks.size() > 5) fail_line(line_no, "machine takes: <name> host=<host> port=<int> [master]");
      MachineDecl m;
      m.rank = static_cast<int>(machines.size());
      m.name = std::string(toks[1]);
      if (!valid_name(m.name)) fail_line(line_no, "bad machine name '" + m.name + "'");
      m.host = std::string(expect_kv(toks[2], "host", line_no));
      long port = parse_int(expect_kv(toks[3], "port", line_no), line_no, "port");
      if (port < 0 || port > 65535) fail_line(line_no, "port out of range");
      m.base_port = static_cast<std::uint16_t>(port);
      if (toks.size() == 5) {
        if (toks[4] != "master") fail_line(line_no, "unexpected token '" + std::string(toks[4]) + "'");
        m.is_master = true;
      }
      if (!machine_by_name.emplace(m.name, m.rank).second) throw AtgError("duplicate machine name '" + m.name + "'");
      machines.push_back(std::move(m));
    } else if (toks[0] == "task") {
      if (toks.size() != 5) fail_line(line_no, "task takes: <var_name> machine=<name> ports=<int> impl=<id>");
      TaskDecl t;
      t.rank = static_cast<int>(tasks.size());
      t.variable_name = std::string(toks[1]);
      if (!valid_name(t.variable_name)) fail_line(line_no, "bad task name '" + t.variable_name + "'");
      pending_task_machine.emplace_back(std::string(expect_kv(toks[2], "machine", line_no)), line_no);
      long ports = parse_int(expect_kv(toks[3], "ports", line_no), line_no, "ports");
      if (ports < 0) fail_line(line_no, "negative port count");
      t.num_ports = static_cast<int>(ports);
      t.component_id = std::string(expect_kv(toks[4], "impl", line_no));
      if (!task_by_name.emplace(t.variable_name, t.rank).second) {
        throw AtgError("duplicate task name '" + t.variable_name + "'");
      }
      tasks.push_back(std::move(t));
    } else if (toks[0] == "link") {
      if (toks.size() != 3) fail_line(line_no, "link takes: <task>.<port> <task>.<port>");
      PendingLink pl;
      pl.line = line_no;
      for (int side = 0; side < 2; ++side) {
        std::string_view tok = toks[1 + side];
        auto dot = tok.rfind('.');
        if (dot == std::string_view::npos || dot == 0) fail_line(line_no, "endpoint must be <task>.<port>");
        long port = parse_int(tok.substr(dot + 1), line_no, "port index");
        (side == 0 ? pl.a_task : pl.b_task) = std::string(tok.substr(0, dot));
        (side == 0 ? pl.a_port : pl.b_port) = port;
      }
      pending_links.push_back(std::move(pl));
    } else {
      fail_line(line_no, "unknown declaration '" + std::string(toks[0]) + "'");
    }
    if (nl == text.size()) break;
  }

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& [name, ln] = pending_task_machine[i];
    auto it = machine_by_name.find(name);
    if (it == machine_by_name.end()) {
      throw AtgError("dangling reference at line " + std::to_string(ln) + ": unknown machine '" + name + "'");
    }
    tasks[i].machine_rank = it->second;
  }
  for (const auto& pl : pending_links) {
    auto ta = task_by_name.find(pl.a_task);
    auto tb = task_by_name.find(pl.b_task);
    if (ta == task_by_name.end() || tb == task_by_name.end()) {
      throw AtgError("dangling reference at line " + std::to_string(pl.line) + ": unknown task");
    }
    LinkDecl l;
    l.link_id = static_cast<int>(links.size());
    l.a = {ta->second, static_cast<int>(pl.a_port)};
    l.b = {tb->second, static_cast<int>(pl.b_port)};
    links.push_back(l);
  }
  return Atg(std::move(machines), std::move(tasks), std::move(links));
}

std::string serialize_atg(const Atg& atg) {
  std::ostringstream os;
  for (const auto& m : atg.machines()) {
    os << "machine " << m.name << " host=" << m.host << " port=" << m.base_port;
    if (m.is_master) os << " master";
    os << '\n';
  }
  for (const auto& t : atg.tasks()) {
    os << "task " << t.variable_name << " machine=" << atg.machine(t.machine_rank).name << " ports=" << t.num_ports
       << " impl=" << t.component_id << '\n';
  }
  for (const auto& l : atg.links()) {
    os << "link " << atg.task(l.a.task_rank).variable_name << '.' << l.a.port_index << ' '
       << atg.task(l.b.task_rank).variable_name << '.' << l.b.port_index << '\n';
  }
  return os.str();
}

Atg load_atg_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw AtgError("cannot open task graph '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_atg(ss.str());
}

std::set<int> peer_machine_set(const Atg& atg, int machine_rank) {
  atg.machine(machine_rank);
  std::set<int> out;
  for (const auto& l : atg.links()) {
    const int ma = atg.machine_of(l.a.task_rank);
    const int mb = atg.machine_of(l.b.task_rank);
    if (ma == machine_rank && mb != machine_rank) out.insert(mb);
    if (mb == machine_rank && ma != machine_rank) out.insert(ma);
  }
  return out;
}

Atg make_manager_worker_atg(int workers, std::uint16_t base_port, const std::string& host) {
  if (workers < 1) throw AtgError("need at least one worker");
  std::vector<MachineDecl> machines;
  std::vector<TaskDecl> tasks;
  std::vector<LinkDecl> links;
  machines.push_back({0, "m0", host, base_port, true});
  tasks.push_back({0, "manager", 0, workers, "npc_manager"});
  for (int w = 1; w <= workers; ++w) {
    machines.push_back({w, "m" + std::to_string(w), host, static_cast<std::uint16_t>(base_port + 2 * w), false});
    tasks.push_back({w, "worker" + std::to_string(w), w, 1, "npc_worker"});
    links.push_back({w - 1, {0, w - 1}, {w, 0}});
  }
  return Atg(std::move(machines), std::move(tasks), std::move(links));
}

}  // namespace qosmw
