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

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qosmw/views.hpp"

namespace qosmw {

class WireError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Bytes = std::vector<std::uint8_t>;

namespace opcode {
inline constexpr std::uint8_t kPing = 0x01;
inline constexpr std::uint8_t kGetMachAttrs = 0x02;
inline constexpr std::uint8_t kGetAppView = 0x03;
inline constexpr std::uint8_t kReportTaskState = 0x04;
inline constexpr std::uint8_t kListPids = 0x05;
inline constexpr std::uint8_t kEchoSmall = 0x06;
inline constexpr std::uint8_t kEchoBulk = 0x07;
inline constexpr std::uint8_t kToken = 0x08;
inline constexpr std::uint8_t kMessage = 0x10;
inline constexpr std::uint8_t kErr = 0x7F;
}  // namespace opcode

/// Frames larger than this are rejected as malformed.
inline constexpr std::uint32_t kMaxFrameLength = 256u * 1024u * 1024u;

/// `len:4 BE | opcode:1 | payload`, where len counts opcode + payload.
struct Frame {
  std::uint8_t opcode = 0;
  Bytes payload;

  friend bool operator==(const Frame&, const Frame&) = default;
};

Bytes encode_frame(const Frame& f);

/// Decodes exactly one frame occupying all of `bytes`.
Frame decode_frame(std::span<const std::uint8_t> bytes);

/// Incremental decoder for a byte stream carrying back-to-back frames.
class FrameDecoder {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  /// Next complete frame, if buffered. Throws WireError on a bad length.
  std::optional<Frame> next();
  std::size_t buffered() const { return buf_.size() - pos_; }

 private:
  Bytes buf_;
  std::size_t pos_ = 0;
};

void put_u16_be(Bytes& out, std::uint16_t v);
void put_u32_be(Bytes& out, std::uint32_t v);
std::uint16_t get_u16_be(std::span<const std::uint8_t> in, std::size_t at);
std::uint32_t get_u32_be(std::span<const std::uint8_t> in, std::size_t at);

Bytes to_bytes(std::string_view s);
std::string to_string(std::span<const std::uint8_t> b);

Frame make_error(std::string_view message);
/// Message text of an ERR frame.
std::string error_message(const Frame& f);

// ---------------------------------------------------------------------------
// key=value payloads. Each block is a run of `key=value` lines ended by a
// blank line; keys appear in a fixed order per block kind. Reals carry six
// significant digits.

using KvBlock = std::vector<std::pair<std::string, std::string>>;

std::string format_real(double v);
std::string encode_blocks(const std::vector<KvBlock>& blocks);
std::vector<KvBlock> decode_blocks(std::string_view text);

/// Block sequence: machine block, one block per hosted task, one per link.
std::string encode_machine_report(const MachineReport& r);
MachineReport decode_machine_report(std::string_view text);

/// `stamp=<k>` block followed by one machine report per machine.
std::string encode_app_payload(std::int64_t stamp, const std::vector<MachineReport>& reports);
std::pair<std::int64_t, std::vector<MachineReport>> decode_app_payload(std::string_view text);

std::string encode_task_report(int task_rank, const TaskState& s);
std::pair<int, TaskState> decode_task_report(std::string_view text);

std::string encode_pids(const std::set<std::int64_t>& pids);
std::set<std::int64_t> decode_pids(std::string_view text);

std::string encode_token(std::int64_t generation);
std::int64_t decode_token(std::string_view text);

}  // namespace qosmw
