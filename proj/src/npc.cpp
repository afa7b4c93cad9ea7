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

#include "qosmw/npc.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <random>

namespace qosmw {

CircuitSpec make_circuit(int n, int s, std::uint64_t seed, bool conjugate_symmetric) {
  if (n < 1 || s < 1) throw std::invalid_argument("circuit needs n >= 1 and s >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CircuitSpec c;
  c.n = n;
  c.s = s;
  c.y.resize(static_cast<std::size_t>(n) * n);
  for (auto& y : c.y) {
    const double re = u(rng);
    const double im = u(rng);
    y = conjugate_symmetric ? cplx(re, 0.0) : cplx(re, im);
  }
  c.v.assign(static_cast<std::size_t>(n), CVec(static_cast<std::size_t>(s)));
  for (auto& vec : c.v) {
    for (auto& x : vec) {
      const double re = u(rng);
      const double im = u(rng);
      x = cplx(re, im);
    }
    if (conjugate_symmetric) {
      vec[0] = cplx(vec[0].real(), 0.0);
      for (int k = 1; k < s; ++k) {
        if (k < s - k) vec[static_cast<std::size_t>(s - k)] = std::conj(vec[static_cast<std::size_t>(k)]);
      }
      if (s % 2 == 0) vec[static_cast<std::size_t>(s / 2)] = cplx(vec[static_cast<std::size_t>(s / 2)].real(), 0.0);
    }
  }
  return c;
}

std::vector<CVec> fd_currents(std::span<const cplx> y_rows, int n, const std::vector<CVec>& v) {
  if (n < 1 || y_rows.size() % static_cast<std::size_t>(n) != 0) throw std::invalid_argument("Y rows do not match n");
  if (v.size() != static_cast<std::size_t>(n)) throw std::invalid_argument("need one voltage vector per port");
  const std::size_t s = v.front().size();
  for (const auto& x : v) {
    if (x.size() != s) throw std::invalid_argument("voltage vectors differ in length");
  }
  const std::size_t rows = y_rows.size() / static_cast<std::size_t>(n);
  std::vector<CVec> out(rows, CVec(s));
  for (std::size_t r = 0; r < rows; ++r) {
    auto& acc = out[r];
    for (int k = 0; k < n; ++k) {
      const cplx y = y_rows[r * static_cast<std::size_t>(n) + static_cast<std::size_t>(k)];
      const auto& vk = v[static_cast<std::size_t>(k)];
      for (std::size_t t = 0; t < s; ++t) acc[t] += y * vk[t];
    }
  }
  return out;
}

std::vector<CVec> fd_currents(const CircuitSpec& spec, int row_start, int row_count) {
  if (row_start < 0 || row_count < 0 || row_start + row_count > spec.n) throw std::invalid_argument("row range out of bounds");
  std::span<const cplx> rows(spec.y.data() + static_cast<std::size_t>(row_start) * spec.n,
                             static_cast<std::size_t>(row_count) * spec.n);
  return fd_currents(rows, spec.n, spec.v);
}

namespace {

bool power_of_two(std::size_t n) { return n && !(n & (n - 1)); }

void radix2(CVec& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const cplx w = std::polar(1.0, ang * static_cast<double>(k));
        const cplx u = a[i + k];
        const cplx v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

CVec direct(const CVec& x, double sign) {
  const std::size_t n = x.size();
  CVec tw(n);
  for (std::size_t k = 0; k < n; ++k) {
    tw[k] = std::polar(1.0, sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
  }
  CVec y(n);
  for (std::size_t t = 0; t < n; ++t) {
    cplx acc = 0.0;
    std::size_t idx = 0;
    for (std::size_t s = 0; s < n; ++s) {
      acc += x[s] * tw[idx];
      idx += t;
      if (idx >= n) idx -= n;
    }
    y[t] = acc;
  }
  return y;
}

}  // namespace

CVec fft(const CVec& x) {
  if (x.empty()) return {};
  if (power_of_two(x.size())) {
    CVec a = x;
    radix2(a);
    return a;
  }
  return direct(x, -1.0);
}

CVec ifft(const CVec& x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  CVec y;
  if (power_of_two(n)) {
    y.resize(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = std::conj(x[i]);
    radix2(y);
    for (auto& v : y) v = std::conj(v);
  } else {
    y = direct(x, 1.0);
  }
  const double scale = 1.0 / static_cast<double>(n);
  for (auto& v : y) v *= scale;
  return y;
}

CVec idft_reference(const CVec& x) {
  const std::size_t n = x.size();
  CVec y(n);
  for (std::size_t t = 0; t < n; ++t) {
    cplx acc = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const double ang = 2.0 * std::numbers::pi * static_cast<double>((t * s) % n) / static_cast<double>(n);
      acc += x[s] * cplx(std::cos(ang), std::sin(ang));
    }
    y[t] = acc / static_cast<double>(n);
  }
  return y;
}

std::vector<CVec> reference_currents(const CircuitSpec& spec) {
  std::vector<CVec> out;
  for (int r = 0; r < spec.n; ++r) {
    CVec fd(static_cast<std::size_t>(spec.s));
    for (int k = 0; k < spec.n; ++k) {
      for (int t = 0; t < spec.s; ++t) fd[static_cast<std::size_t>(t)] += spec.y_at(r, k) * spec.v[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)];
    }
    out.push_back(idft_reference(fd));
  }
  return out;
}

std::vector<int> CurrentResult::missing_rows() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

double CurrentResult::max_imag() const {
  double m = 0.0;
  for (const auto& r : rows) {
    if (!r) continue;
    for (const auto& v : *r) m = std::max(m, std::abs(v.imag()));
  }
  return m;
}

double max_abs_diff(const CurrentResult& got, const std::vector<CVec>& expected) {
  double m = 0.0;
  for (std::size_t i = 0; i < got.rows.size() && i < expected.size(); ++i) {
    if (!got.rows[i]) continue;
    const auto& a = *got.rows[i];
    const auto& b = expected[i];
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < a.size(); ++t) m = std::max(m, std::abs(a[t] - b[t]));
  }
  return m;
}

// ---------------------------------------------------------------------------

std::span<const cplx> Assignment::y_row(int row) const {
  const int local = full_y ? row : row - row_start;
  if (local < 0 || static_cast<std::size_t>(local + 1) * n > y.size()) throw std::out_of_range("Y row not in assignment");
  return {y.data() + static_cast<std::size_t>(local) * n, static_cast<std::size_t>(n)};
}

Assignment make_assignment(const CircuitSpec& spec, int row_start, int row_count, bool full_y) {
  if (row_start < 0 || row_count < 0 || row_start + row_count > spec.n) throw std::invalid_argument("row range out of bounds");
  Assignment a;
  a.n = spec.n;
  a.s = spec.s;
  a.row_start = row_start;
  a.row_count = row_count;
  if (row_count == 0) return a;
  a.full_y = full_y;
  if (full_y) {
    a.y = spec.y;
  } else {
    a.y.assign(spec.y.begin() + static_cast<std::ptrdiff_t>(row_start) * spec.n,
               spec.y.begin() + static_cast<std::ptrdiff_t>(row_start + row_count) * spec.n);
  }
  a.v = spec.v;
  return a;
}

Assignment make_release(int n, int s) {
  Assignment a;
  a.n = n;
  a.s = s;
  return a;
}

namespace {

void put_f64_le(Bytes& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

double get_f64_le(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(in[at + static_cast<std::size_t>(i)]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

void put_cvec(Bytes& out, const CVec& x) {
  for (const auto& c : x) {
    put_f64_le(out, c.real());
    put_f64_le(out, c.imag());
  }
}

CVec get_cvec(std::span<const std::uint8_t> in, std::size_t at, std::size_t count) {
  CVec out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = cplx(get_f64_le(in, at + 16 * i), get_f64_le(in, at + 16 * i + 8));
  }
  return out;
}

}  // namespace

Bytes encode_assignment(const Assignment& a) {
  Bytes out;
  const std::size_t body = a.release() ? 0 : 16 * (a.y.size() + static_cast<std::size_t>(a.n) * a.s);
  out.reserve(16 + body);
  put_u32_be(out, static_cast<std::uint32_t>(a.n));
  put_u32_be(out, static_cast<std::uint32_t>(a.s));
  put_u32_be(out, static_cast<std::uint32_t>(a.row_start));
  put_u32_be(out, static_cast<std::uint32_t>(a.row_count));
  if (a.release()) return out;
  put_cvec(out, a.y);
  for (const auto& vec : a.v) put_cvec(out, vec);
  return out;
}

Assignment decode_assignment(std::span<const std::uint8_t> p) {
  if (p.size() < 16) throw WireError("assignment too short");
  Assignment a;
  a.n = static_cast<int>(get_u32_be(p, 0));
  a.s = static_cast<int>(get_u32_be(p, 4));
  a.row_start = static_cast<int>(get_u32_be(p, 8));
  a.row_count = static_cast<int>(get_u32_be(p, 12));
  if (a.n < 1 || a.s < 1 || a.row_start < 0 || a.row_count < 0 || a.row_start + a.row_count > a.n) {
    throw WireError("assignment header out of range");
  }
  if (a.row_count == 0) {
    if (p.size() != 16) throw WireError("release carries a body");
    return a;
  }
  const std::size_t n = static_cast<std::size_t>(a.n);
  const std::size_t v_pairs = n * static_cast<std::size_t>(a.s);
  const std::size_t sliced = 16 + 16 * (static_cast<std::size_t>(a.row_count) * n + v_pairs);
  const std::size_t full = 16 + 16 * (n * n + v_pairs);
  std::size_t y_pairs;
  if (p.size() == sliced) {
    y_pairs = static_cast<std::size_t>(a.row_count) * n;
    a.full_y = static_cast<std::size_t>(a.row_count) == n;
  } else if (p.size() == full) {
    y_pairs = n * n;
    a.full_y = true;
  } else {
    throw WireError("assignment length does not match its header");
  }
  a.y = get_cvec(p, 16, y_pairs);
  std::size_t at = 16 + 16 * y_pairs;
  for (std::size_t k = 0; k < n; ++k) {
    a.v.push_back(get_cvec(p, at, static_cast<std::size_t>(a.s)));
    at += 16 * static_cast<std::size_t>(a.s);
  }
  return a;
}

Bytes encode_td_reply(std::uint32_t key, const CVec& td) {
  Bytes out;
  out.reserve(4 + 16 * td.size());
  put_u32_be(out, key);
  put_cvec(out, td);
  return out;
}

std::pair<std::uint32_t, CVec> decode_td_reply(std::span<const std::uint8_t> p) {
  if (p.size() < 4 || (p.size() - 4) % 16 != 0) throw WireError("bad result length");
  return {get_u32_be(p, 0), get_cvec(p, 4, (p.size() - 4) / 16)};
}

}  // namespace qosmw
