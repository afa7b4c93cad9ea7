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

#include "qosmw/wire.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace qosmw {

void put_u16_be(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32_be(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint16_t get_u16_be(std::span<const std::uint8_t> in, std::size_t at) {
  if (at + 2 > in.size()) throw WireError("truncated u16");
  return static_cast<std::uint16_t>((in[at] << 8) | in[at + 1]);
}

std::uint32_t get_u32_be(std::span<const std::uint8_t> in, std::size_t at) {
  if (at + 4 > in.size()) throw WireError("truncated u32");
  return (static_cast<std::uint32_t>(in[at]) << 24) | (static_cast<std::uint32_t>(in[at + 1]) << 16) |
         (static_cast<std::uint32_t>(in[at + 2]) << 8) | static_cast<std::uint32_t>(in[at + 3]);
}

Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

std::string to_string(std::span<const std::uint8_t> b) { return std::string(b.begin(), b.end()); }

Bytes encode_frame(const Frame& f) {
  const std::size_t len = f.payload.size() + 1;
  if (len > kMaxFrameLength) throw WireError("frame too large");
  Bytes out;
  out.reserve(4 + len);
  put_u32_be(out, static_cast<std::uint32_t>(len));
  out.push_back(f.opcode);
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  return out;
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 5) throw WireError("frame shorter than header");
  const std::uint32_t len = get_u32_be(bytes, 0);
  if (len == 0 || len > kMaxFrameLength) throw WireError("bad frame length");
  if (bytes.size() != 4 + static_cast<std::size_t>(len)) throw WireError("frame length mismatch");
  Frame f;
  f.opcode = bytes[4];
  f.payload.assign(bytes.begin() + 5, bytes.end());
  return f;
}

void FrameDecoder::feed(std::span<const std::uint8_t> bytes) {
  if (pos_ > 0 && pos_ == buf_.size()) {
    buf_.clear();
    pos_ = 0;
  }
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<Frame> FrameDecoder::next() {
  const std::size_t avail = buf_.size() - pos_;
  if (avail < 4) return std::nullopt;
  const std::uint32_t len = get_u32_be(buf_, pos_);
  if (len == 0 || len > kMaxFrameLength) throw WireError("bad frame length");
  if (avail < 4 + static_cast<std::size_t>(len)) return std::nullopt;
  Frame f;
  f.opcode = buf_[pos_ + 4];
  f.payload.assign(buf_.begin() + static_cast<std::ptrdiff_t>(pos_ + 5),
                   buf_.begin() + static_cast<std::ptrdiff_t>(pos_ + 4 + len));
  pos_ += 4 + len;
  if (pos_ > 65536 && pos_ * 2 > buf_.size()) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
    pos_ = 0;
  }
  return f;
}

Frame make_error(std::string_view message) {
  std::string clean(message);
  for (char& c : clean) {
    if (c == '\n') c = ' ';
  }
  return Frame{opcode::kErr, to_bytes(encode_blocks({{{"error", clean}}}))};
}

std::string error_message(const Frame& f) {
  if (f.opcode != opcode::kErr) return {};
  try {
    auto blocks = decode_blocks(to_string(f.payload));
    if (!blocks.empty() && !blocks[0].empty() && blocks[0][0].first == "error") return blocks[0][0].second;
  } catch (const WireError&) {
  }
  return "malformed error frame";
}

// ---------------------------------------------------------------------------

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string encode_blocks(const std::vector<KvBlock>& blocks) {
  std::string out;
  for (const auto& b : blocks) {
    for (const auto& [k, v] : b) {
      if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
        throw WireError("key/value not encodable: " + k);
      }
      out += k;
      out += '=';
      out += v;
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

std::vector<KvBlock> decode_blocks(std::string_view text) {
  std::vector<KvBlock> out;
  KvBlock cur;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) throw WireError("payload not newline-terminated");
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) {
      if (cur.empty()) throw WireError("empty block");
      out.push_back(std::move(cur));
      cur.clear();
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos || eq == 0) throw WireError("line without key: " + std::string(line));
    cur.emplace_back(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
  }
  if (!cur.empty()) throw WireError("last block not terminated by a blank line");
  return out;
}

namespace {

class BlockReader {
 public:
  explicit BlockReader(const KvBlock& b) : b_(b) {}

  const std::string& take(std::string_view key) {
    if (i_ >= b_.size() || b_[i_].first != key) {
      throw WireError("expected key '" + std::string(key) + "'" +
                      (i_ < b_.size() ? ", got '" + b_[i_].first + "'" : std::string(", got end of block")));
    }
    return b_[i_++].second;
  }

  std::int64_t take_int(std::string_view key) {
    const std::string& s = take(key);
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw WireError("bad integer for " + std::string(key));
    return v;
  }

  double take_real(std::string_view key) {
    const std::string& s = take(key);
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
      throw WireError("bad real for " + std::string(key));
    }
    return v;
  }

  void finish() const {
    if (i_ != b_.size()) throw WireError("unexpected key '" + b_[i_].first + "'");
  }

 private:
  const KvBlock& b_;
  std::size_t i_ = 0;
};

KvBlock machine_block(const MachineReport& r) {
  const auto& a = r.attrs;
  return {
      {"machine", std::to_string(r.machine_rank)},
      {"stamp", std::to_string(r.stamp)},
      {"os_type", a.os_type},
      {"cpu_speed_mhz", format_real(a.cpu_speed_mhz)},
      {"num_cpus", std::to_string(a.num_cpus)},
      {"workload", format_real(a.workload)},
      {"effective_speed_mhz", format_real(a.effective_speed_mhz)},
      {"free_ram_bytes", std::to_string(a.free_ram_bytes)},
      {"free_swap_bytes", std::to_string(a.free_swap_bytes)},
      {"mach_state", std::string(to_string(a.mach_state))},
  };
}

KvBlock task_block(int rank, const TaskState& s) {
  return {{"task", std::to_string(rank)}, {"state", std::string(to_string(s.phase))}, {"pid", std::to_string(s.pid)}};
}

KvBlock link_block(int id, const LinkAttributes& l) {
  return {
      {"link", std::to_string(id)},
      {"latency_ms", format_real(l.latency_ms)},
      {"throughput_mbps", format_real(l.throughput_mbps)},
      {"stamp", std::to_string(l.last_measured_stamp)},
      {"stale", l.stale ? "1" : "0"},
  };
}

void append_report(std::vector<KvBlock>& out, const MachineReport& r) {
  out.push_back(machine_block(r));
  for (const auto& [t, s] : r.tasks) out.push_back(task_block(t, s));
  for (const auto& [id, l] : r.links) out.push_back(link_block(id, l));
}

MachineReport read_machine_block(const KvBlock& b) {
  BlockReader rd(b);
  MachineReport r;
  r.machine_rank = static_cast<int>(rd.take_int("machine"));
  r.stamp = rd.take_int("stamp");
  r.attrs.os_type = rd.take("os_type");
  r.attrs.cpu_speed_mhz = rd.take_real("cpu_speed_mhz");
  r.attrs.num_cpus = static_cast<int>(rd.take_int("num_cpus"));
  r.attrs.workload = rd.take_real("workload");
  r.attrs.effective_speed_mhz = rd.take_real("effective_speed_mhz");
  r.attrs.free_ram_bytes = rd.take_int("free_ram_bytes");
  r.attrs.free_swap_bytes = rd.take_int("free_swap_bytes");
  auto ms = mach_state_from_string(rd.take("mach_state"));
  if (!ms) throw WireError("bad mach_state");
  r.attrs.mach_state = *ms;
  rd.finish();
  return r;
}

std::pair<int, TaskState> read_task_block(const KvBlock& b) {
  BlockReader rd(b);
  const int rank = static_cast<int>(rd.take_int("task"));
  auto phase = task_phase_from_string(rd.take("state"));
  if (!phase) throw WireError("bad task state");
  TaskState s{*phase, rd.take_int("pid")};
  rd.finish();
  return {rank, s};
}

std::pair<int, LinkAttributes> read_link_block(const KvBlock& b) {
  BlockReader rd(b);
  const int id = static_cast<int>(rd.take_int("link"));
  LinkAttributes l;
  l.latency_ms = rd.take_real("latency_ms");
  l.throughput_mbps = rd.take_real("throughput_mbps");
  l.last_measured_stamp = rd.take_int("stamp");
  const std::int64_t stale = rd.take_int("stale");
  if (stale != 0 && stale != 1) throw WireError("bad stale flag");
  l.stale = stale == 1;
  rd.finish();
  return {id, l};
}

// Consumes one machine report starting at blocks[i]; advances i.
MachineReport read_report(const std::vector<KvBlock>& blocks, std::size_t& i) {
  if (i >= blocks.size() || blocks[i].empty() || blocks[i][0].first != "machine") {
    throw WireError("expected machine block");
  }
  MachineReport r = read_machine_block(blocks[i++]);
  while (i < blocks.size() && !blocks[i].empty() && blocks[i][0].first == "task") {
    auto [t, s] = read_task_block(blocks[i++]);
    r.tasks[t] = s;
  }
  while (i < blocks.size() && !blocks[i].empty() && blocks[i][0].first == "link") {
    auto [id, l] = read_link_block(blocks[i++]);
    r.links[id] = l;
  }
  return r;
}

}  // namespace

std::string encode_machine_report(const MachineReport& r) {
  std::vector<KvBlock> blocks;
  append_report(blocks, r);
  return encode_blocks(blocks);
}

MachineReport decode_machine_report(std::string_view text) {
  auto blocks = decode_blocks(text);
  std::size_t i = 0;
  MachineReport r = read_report(blocks, i);
  if (i != blocks.size()) throw WireError("trailing blocks after machine report");
  return r;
}

std::string encode_app_payload(std::int64_t stamp, const std::vector<MachineReport>& reports) {
  std::vector<KvBlock> blocks;
  blocks.push_back({{"stamp", std::to_string(stamp)}});
  for (const auto& r : reports) append_report(blocks, r);
  return encode_blocks(blocks);
}

std::pair<std::int64_t, std::vector<MachineReport>> decode_app_payload(std::string_view text) {
  auto blocks = decode_blocks(text);
  if (blocks.empty()) throw WireError("empty app payload");
  BlockReader head(blocks[0]);
  const std::int64_t stamp = head.take_int("stamp");
  head.finish();
  std::vector<MachineReport> reports;
  std::size_t i = 1;
  while (i < blocks.size()) reports.push_back(read_report(blocks, i));
  return {stamp, std::move(reports)};
}

std::string encode_task_report(int task_rank, const TaskState& s) { return encode_blocks({task_block(task_rank, s)}); }

std::pair<int, TaskState> decode_task_report(std::string_view text) {
  auto blocks = decode_blocks(text);
  if (blocks.size() != 1) throw WireError("task report must be one block");
  return read_task_block(blocks[0]);
}

std::string encode_pids(const std::set<std::int64_t>& pids) {
  std::string list;
  for (auto p : pids) {
    if (!list.empty()) list += ',';
    list += std::to_string(p);
  }
  return encode_blocks({{{"pids", list}}});
}

std::set<std::int64_t> decode_pids(std::string_view text) {
  auto blocks = decode_blocks(text);
  if (blocks.size() != 1) throw WireError("pid list must be one block");
  BlockReader rd(blocks[0]);
  const std::string& list = rd.take("pids");
  rd.finish();
  std::set<std::int64_t> out;
  std::size_t pos = 0;
  while (pos < list.size()) {
    std::size_t comma = list.find(',', pos);
    if (comma == std::string::npos) comma = list.size();
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(list.data() + pos, list.data() + comma, v);
    if (ec != std::errc{} || p != list.data() + comma) throw WireError("bad pid");
    out.insert(v);
    pos = comma + 1;
  }
  return out;
}

std::string encode_token(std::int64_t generation) {
  return encode_blocks({{{"generation", std::to_string(generation)}}});
}

std::int64_t decode_token(std::string_view text) {
  auto blocks = decode_blocks(text);
  if (blocks.size() != 1) throw WireError("token must be one block");
  BlockReader rd(blocks[0]);
  auto g = rd.take_int("generation");
  rd.finish();
  return g;
}

}  // namespace qosmw
