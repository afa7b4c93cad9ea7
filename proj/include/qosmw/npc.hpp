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

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "qosmw/wire.hpp"

namespace qosmw {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;

/// Frequency-independent admittance matrix (row-major, n x n) and one
/// frequency-domain voltage vector of `s` samples per port.
struct CircuitSpec {
  int n = 0;
  int s = 0;
  CVec y;
  std::vector<CVec> v;

  cplx y_at(int row, int col) const { return y[static_cast<std::size_t>(row) * n + col]; }
};

/// Seeded pseudo-random circuit. With `conjugate_symmetric`, Y is real and
/// every V is Hermitian so the time-domain currents are real.
CircuitSpec make_circuit(int n, int s, std::uint64_t seed, bool conjugate_symmetric = false);

/// I[r][t] = sum_k y_rows[r * n + k] * v[k][t] for each row in `y_rows`.
std::vector<CVec> fd_currents(std::span<const cplx> y_rows, int n, const std::vector<CVec>& v);
std::vector<CVec> fd_currents(const CircuitSpec& spec, int row_start, int row_count);

/// Forward DFT (no scaling) and inverse DFT (1/S scaling). Radix-2 for powers
/// of two, direct evaluation with a twiddle table otherwise.
CVec fft(const CVec& x);
CVec ifft(const CVec& x);

/// Textbook O(S^2) inverse DFT evaluating every exponential afresh.
CVec idft_reference(const CVec& x);

/// Single-process time-domain currents, one vector per port.
std::vector<CVec> reference_currents(const CircuitSpec& spec);

struct CurrentResult {
  int n = 0;
  int s = 0;
  std::vector<std::optional<CVec>> rows;

  std::vector<int> missing_rows() const;
  bool complete() const { return missing_rows().empty(); }
  double max_imag() const;
};

/// Largest |a - b| over all samples of rows present in `got`.
double max_abs_diff(const CurrentResult& got, const std::vector<CVec>& expected);

// ---------------------------------------------------------------------------
// Payloads between the manager task and its workers.

/// A block of rows for one worker. `row_count` 0 releases the worker.
struct Assignment {
  int n = 0;
  int s = 0;
  int row_start = 0;
  int row_count = 0;
  bool full_y = false;
  CVec y;  // row_count x n, or n x n with full_y
  std::vector<CVec> v;

  bool release() const { return row_count == 0; }
  /// Y row for global row index `row`.
  std::span<const cplx> y_row(int row) const;
};

Assignment make_assignment(const CircuitSpec& spec, int row_start, int row_count, bool full_y);
Assignment make_release(int n, int s);

/// Header `n, s, row_start, row_count` (4-byte BE each), then f64 LE re/im
/// pairs: the Y rows followed by all V vectors. Release carries the header
/// only. Full or sliced Y is told apart by length.
Bytes encode_assignment(const Assignment& a);
Assignment decode_assignment(std::span<const std::uint8_t> payload);

/// Result key (4-byte BE) then S f64 LE re/im pairs.
Bytes encode_td_reply(std::uint32_t key, const CVec& td);
std::pair<std::uint32_t, CVec> decode_td_reply(std::span<const std::uint8_t> payload);

}  // namespace qosmw
