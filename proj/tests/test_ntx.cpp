/*
   Copyright 2026 the ntxsim authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/
#include "ntxsim/ntx.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <vector>

using namespace ntx;

namespace {

constexpr std::size_t kTcdmBytes = 128 * 1024;

struct Bench {
  std::vector<std::byte> mem{kTcdmBytes};

  std::span<std::byte> span() { return {mem.data(), mem.size()}; }
  void put(std::int64_t addr, float v) { std::memcpy(mem.data() + addr, &v, 4); }
  void put(std::int64_t addr, const std::vector<float>& vs) {
    for (std::size_t i = 0; i < vs.size(); ++i) put(addr + 4 * i, vs[i]);
  }
  float get(std::int64_t addr) const {
    float v;
    std::memcpy(&v, mem.data() + addr, 4);
    return v;
  }
  std::uint32_t get_u32(std::int64_t addr) const {
    std::uint32_t v;
    std::memcpy(&v, mem.data() + addr, 4);
    return v;
  }
};

NtxCommand vector_cmd(Opcode op, std::uint32_t n, std::int64_t a0,
                      std::int64_t a1, std::int64_t out, float scalar = 0.0f) {
  NtxCommand cmd;
  cmd.opcode = op;
  cmd.hwl.bounds[0] = n;
  cmd.hwl.outer_level = 0;
  cmd.agu[0].base = a0;
  cmd.agu[0].step = {4, 0, 0, 0, 0};
  cmd.agu[1].base = a1;
  cmd.agu[1].step = {4, 0, 0, 0, 0};
  cmd.agu[2].base = out;
  cmd.agu[2].step = {4, 0, 0, 0, 0};
  cmd.scalar = scalar;
  return cmd;
}

NtxCommand reduce_cmd(Opcode op, std::uint32_t n, std::int64_t a0,
                      std::int64_t a1, std::int64_t out, float scalar = 0.0f) {
  // Whole-vector reduction: the block lives at level 1 (bound 1), so the
  // accumulator initializes once and stores once.
  NtxCommand cmd = vector_cmd(op, n, a0, a1, out, scalar);
  cmd.hwl.outer_level = 1;
  cmd.hwl.init_level = 1;
  cmd.hwl.store_level = 1;
  cmd.agu[2].step = {0, 0, 0, 0, 0};  // one result
  return cmd;
}

}  // namespace

TEST_CASE("dot product reduces once at the end") {
  Bench b;
  b.put(0, {1, 2, 3});
  b.put(64, {4, 5, 6});
  const auto cmd = reduce_cmd(Opcode::kMac, 3, 0, 64, 128);
  const ExecStats st = execute_command(cmd, b.span());
  CHECK(b.get(128) == 32.0f);
  CHECK(st.inner_iters == 3);
  CHECK(st.busy_cycles == 3 + kDrainCycles);
  CHECK(!st.invalid);
}

TEST_CASE("accumulator seed participates in the sum") {
  Bench b;
  b.put(0, {1, 2});
  b.put(64, {10, 10});
  const auto cmd = reduce_cmd(Opcode::kMac, 2, 0, 64, 128, 0.5f);
  execute_command(cmd, b.span());
  CHECK(b.get(128) == 30.5f);
}

TEST_CASE("max and argmax keep the first of tied maxima") {
  Bench b;
  b.put(0, {-1, 7, 3, 7, 2});
  auto cmd = reduce_cmd(Opcode::kMax, 5, 0, 0, 256,
                        -std::numeric_limits<float>::infinity());
  execute_command(cmd, b.span());
  CHECK(b.get(256) == 7.0f);

  cmd.opcode = Opcode::kArgMax;
  cmd.agu[2].base = 260;
  execute_command(cmd, b.span());
  CHECK(b.get_u32(260) == 1);
}

TEST_CASE("min keeps the first of tied minima") {
  Bench b;
  b.put(0, {4, -2, 5, -2});
  const auto cmd = reduce_cmd(Opcode::kMin, 4, 0, 0, 256,
                              std::numeric_limits<float>::infinity());
  execute_command(cmd, b.span());
  CHECK(b.get(256) == -2.0f);
}

TEST_CASE("busy cycles are the active bound product plus drain") {
  Bench b;
  NtxCommand cmd;
  cmd.opcode = Opcode::kMemset;
  cmd.hwl.bounds = {7, 7, 3, 1, 1};
  cmd.hwl.outer_level = 2;
  cmd.hwl.init_level = 2;
  cmd.hwl.store_level = 2;
  cmd.agu[2].base = 512;
  const ExecStats st = execute_command(cmd, b.span());
  CHECK(st.inner_iters == 147);
  CHECK(st.busy_cycles == 151);
}

TEST_CASE("relu clamps at the threshold and is idempotent") {
  Bench b;
  b.put(0, {-2.0f, -0.0f, 3.0f});
  auto cmd = vector_cmd(Opcode::kRelu, 3, 0, 0, 64);
  execute_command(cmd, b.span());
  CHECK(b.get(64) == 0.0f);
  CHECK(b.get(68) == 0.0f);
  CHECK(b.get(72) == 3.0f);

  cmd.agu[0].base = 64;
  cmd.agu[2].base = 128;
  execute_command(cmd, b.span());
  CHECK(b.get(128) == 0.0f);
  CHECK(b.get(132) == 0.0f);
  CHECK(b.get(136) == 3.0f);
}

TEST_CASE("threshold mask gates the second stream") {
  Bench b;
  b.put(0, {1.0f, -1.0f, 0.5f});
  b.put(64, {10.0f, 20.0f, 30.0f});
  const auto cmd = vector_cmd(Opcode::kThreshMask, 3, 0, 64, 128);
  execute_command(cmd, b.span());
  CHECK(b.get(128) == 10.0f);
  CHECK(b.get(132) == 0.0f);
  CHECK(b.get(136) == 30.0f);
}

TEST_CASE("copy and memset move words") {
  Bench b;
  b.put(0, {3.5f, -1.25f});
  execute_command(vector_cmd(Opcode::kCopy, 2, 0, 0, 64), b.span());
  CHECK(b.get(64) == 3.5f);
  CHECK(b.get(68) == -1.25f);

  execute_command(vector_cmd(Opcode::kMemset, 2, 0, 0, 64, 9.0f), b.span());
  CHECK(b.get(64) == 9.0f);
  CHECK(b.get(68) == 9.0f);
}

TEST_CASE("vector add and mult round once per element") {
  Bench b;
  std::mt19937 rng(321);
  std::uniform_real_distribution<float> dv(-100.0f, 100.0f);
  std::vector<float> x(64), y(64);
  for (auto& v : x) v = dv(rng);
  for (auto& v : y) v = dv(rng);
  b.put(0, x);
  b.put(1024, y);

  execute_command(vector_cmd(Opcode::kVAdd, 64, 0, 1024, 2048), b.span());
  execute_command(vector_cmd(Opcode::kVMult, 64, 0, 1024, 3072), b.span());
  for (int i = 0; i < 64; ++i) {
    // double holds both the exact sum and product of two floats
    CHECK(b.get(2048 + 4 * i) ==
          static_cast<float>(double(x[i]) + double(y[i])));
    CHECK(b.get(3072 + 4 * i) ==
          static_cast<float>(double(x[i]) * double(y[i])));
  }
}

TEST_CASE("per block reduction stores one value per outer iteration") {
  Bench b;
  b.put(0, {1, 2, 3, 4, 5, 6});  // two rows of three
  b.put(256, {1, 1, 1, 1, 1, 1});
  NtxCommand cmd;
  cmd.opcode = Opcode::kMac;
  cmd.hwl.bounds = {3, 2, 1, 1, 1};
  cmd.hwl.outer_level = 1;
  cmd.hwl.init_level = 1;
  cmd.hwl.store_level = 1;
  cmd.agu[0] = agu_from_word_strides(0, std::vector<std::int64_t>{1, 3},
                                     std::vector<std::uint32_t>{3, 2});
  cmd.agu[1] = agu_from_word_strides(256, std::vector<std::int64_t>{1, 3},
                                     std::vector<std::uint32_t>{3, 2});
  cmd.agu[2] = agu_from_word_strides(512, std::vector<std::int64_t>{0, 1},
                                     std::vector<std::uint32_t>{3, 2});
  execute_command(cmd, b.span());
  CHECK(b.get(512) == 6.0f);   // 1+2+3
  CHECK(b.get(516) == 15.0f);  // 4+5+6
}

TEST_CASE("nan input poisons the accumulator and flags the command") {
  Bench b;
  b.put(0, {1.0f, std::numeric_limits<float>::quiet_NaN()});
  b.put(64, {1.0f, 1.0f});
  const ExecStats st =
      execute_command(reduce_cmd(Opcode::kMac, 2, 0, 64, 128), b.span());
  CHECK(st.invalid);
  CHECK(std::isnan(b.get(128)));
}

TEST_CASE("reads outside the memory window fault with the iteration") {
  Bench b;
  auto cmd = reduce_cmd(Opcode::kMac, 4, kTcdmBytes - 8, 0, 128);
  try {
    execute_command(cmd, b.span());
    FAIL("expected AddressFault");
  } catch (const AddressFault& f) {
    CHECK(f.index[0] == 2);
    CHECK(f.address == static_cast<std::int64_t>(kTcdmBytes));
  }
}

TEST_CASE("issue snapshots the staging area") {
  Bench b;
  b.put(0, {1, 1, 1, 1});
  b.put(64, {2, 2, 2, 2});
  NtxEngine eng;
  eng.staging() = reduce_cmd(Opcode::kMac, 4, 0, 64, 128);
  CHECK(eng.issue());
  eng.staging().hwl.bounds[0] = 1;  // live write after issue
  eng.drain_one(b.span());
  CHECK(b.get(128) == 8.0f);  // snapshot kept the old bound
}

TEST_CASE("one command can wait behind the runner, a third is refused") {
  Bench b;
  b.put(0, {2, 3});
  NtxEngine eng;
  eng.staging() = reduce_cmd(Opcode::kMac, 2, 0, 0, 64);  // 4 + 9
  CHECK(eng.issue());
  eng.staging() = vector_cmd(Opcode::kCopy, 1, 64, 0, 68);
  CHECK(eng.issue());
  CHECK(!eng.issue());  // queue slot full: back-pressure
  CHECK(eng.outstanding() == 2);

  eng.drain_one(b.span());
  CHECK(b.get(64) == 13.0f);
  CHECK(eng.outstanding() == 1);
  eng.drain_one(b.span());
  CHECK(b.get(68) == 13.0f);  // the queued copy saw the first result
  CHECK(!eng.busy());
}

TEST_CASE("broadcast configuration reaches all engines") {
  std::vector<NtxEngine> bank(8);
  const auto cmd = reduce_cmd(Opcode::kMac, 7, 0, 64, 128);
  for (auto& e : bank) e.staging() = cmd;  // broadcast staging write
  for (auto& e : bank) {
    CHECK(e.staging().hwl.bounds[0] == 7);
    CHECK(e.staging().agu[1].base == 64);
  }
}

TEST_CASE("random dot products bit-match a float64 pairwise oracle") {
  // Products of floats are exact in double; summing 48-bit products in a
  // 64-entry tree keeps the double sum exact far beyond float32 precision,
  // so after one rounding both routes must agree bit for bit whenever the
  // double sum is exactly representable. Restrict to small integers where
  // that holds by construction.
  std::mt19937 rng(777);
  std::uniform_int_distribution<int> dv(-9, 9);
  std::uniform_int_distribution<int> dn(1, 64);
  Bench b;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = dn(rng);
    std::vector<float> x(n), w(n);
    double exact = 0.0;
    for (int i = 0; i < n; ++i) {
      x[i] = static_cast<float>(dv(rng));
      w[i] = static_cast<float>(dv(rng));
      exact += double(x[i]) * double(w[i]);
    }
    b.put(0, x);
    b.put(16384, w);
    execute_command(reduce_cmd(Opcode::kMac, n, 0, 16384, 65536), b.span());
    CAPTURE(trial);
    CHECK(b.get(65536) == static_cast<float>(exact));
  }
}
