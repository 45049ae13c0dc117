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

#include <cstring>

#include "ntxsim/accumulator.hpp"

namespace ntx {
namespace {

float load_word(std::span<std::byte> tcdm, std::int64_t addr,
                const std::array<std::uint32_t, kMaxLoops>& idx) {
  if (addr < 0 || addr % 4 != 0 ||
      addr + 4 > static_cast<std::int64_t>(tcdm.size()))
    throw AddressFault(addr, idx);
  float v;
  std::memcpy(&v, tcdm.data() + addr, 4);
  return v;
}

void store_word(std::span<std::byte> tcdm, std::int64_t addr, float v,
                const std::array<std::uint32_t, kMaxLoops>& idx) {
  if (addr < 0 || addr % 4 != 0 ||
      addr + 4 > static_cast<std::int64_t>(tcdm.size()))
    throw AddressFault(addr, idx);
  std::memcpy(tcdm.data() + addr, &v, 4);
}

void store_index(std::span<std::byte> tcdm, std::int64_t addr, std::uint32_t v,
                 const std::array<std::uint32_t, kMaxLoops>& idx) {
  if (addr < 0 || addr % 4 != 0 ||
      addr + 4 > static_cast<std::int64_t>(tcdm.size()))
    throw AddressFault(addr, idx);
  std::memcpy(tcdm.data() + addr, &v, 4);
}

}  // namespace

int read_streams(Opcode op) {
  switch (op) {
    case Opcode::kMac:
    case Opcode::kVMult:
    case Opcode::kVAdd:
    case Opcode::kOuterP:
    case Opcode::kThreshMask:
      return 2;
    case Opcode::kMin:
    case Opcode::kMax:
    case Opcode::kArgMax:
    case Opcode::kRelu:
    case Opcode::kCopy:
      return 1;
    case Opcode::kMemset:
      return 0;
  }
  return 0;
}

ExecStats execute_command(const NtxCommand& cmd, std::span<std::byte> tcdm) {
  validate_hwl(cmd.hwl);
  NestWalker walker(cmd.hwl, cmd.agu);
  const int nread = read_streams(cmd.opcode);

  ExecStats stats;
  stats.inner_iters = walker.total_steps();
  stats.busy_cycles = stats.inner_iters + kDrainCycles;

  WideAccumulator acc;
  float extremum = 0.0f;     // running min/max value
  std::uint32_t arg = 0;     // index of the current extremum
  std::uint32_t block_i = 0; // flat element index within the init block
  float elem = 0.0f;         // per-element result for the pass-through ops

  NestWalker::Step st;
  while (walker.next(st)) {
    const float a0 = nread >= 1 ? load_word(tcdm, st.addr[0], st.index) : 0.0f;
    const float a1 = nread >= 2 ? load_word(tcdm, st.addr[1], st.index) : 0.0f;

    if (st.init) {
      acc.clear();
      acc.add(cmd.scalar);
      extremum = cmd.scalar;
      arg = 0;
      block_i = 0;
    }

    switch (cmd.opcode) {
      case Opcode::kMac:
      case Opcode::kVMult:
      case Opcode::kOuterP:
        acc.fmac(a0, a1);
        break;
      case Opcode::kVAdd:
        acc.add(a0);
        acc.add(a1);
        break;
      case Opcode::kMin:
        if (a0 < extremum) extremum = a0;
        break;
      case Opcode::kMax:
        if (a0 > extremum) extremum = a0;
        break;
      case Opcode::kArgMax:
        if (a0 > extremum) {
          extremum = a0;
          arg = block_i;
        }
        break;
      case Opcode::kRelu:
        elem = a0 > cmd.scalar ? a0 : cmd.scalar;
        break;
      case Opcode::kThreshMask:
        elem = a0 > cmd.scalar ? a1 : 0.0f;
        break;
      case Opcode::kCopy:
        elem = a0;
        break;
      case Opcode::kMemset:
        elem = cmd.scalar;
        break;
    }
    ++block_i;

    if (st.store) {
      switch (cmd.opcode) {
        case Opcode::kMac:
        case Opcode::kVMult:
        case Opcode::kVAdd:
        case Opcode::kOuterP:
          stats.invalid |= acc.invalid();
          store_word(tcdm, st.addr[2], acc.reduce(), st.index);
          break;
        case Opcode::kMin:
        case Opcode::kMax:
          store_word(tcdm, st.addr[2], extremum, st.index);
          break;
        case Opcode::kArgMax:
          store_index(tcdm, st.addr[2], arg, st.index);
          break;
        default:
          store_word(tcdm, st.addr[2], elem, st.index);
          break;
      }
    }
  }
  return stats;
}

bool NtxEngine::issue() {
  if (!running_) {
    running_ = staging_;
    return true;
  }
  if (!queued_) {
    queued_ = staging_;
    return true;
  }
  return false;
}

int NtxEngine::outstanding() const {
  return (running_ ? 1 : 0) + (queued_ ? 1 : 0);
}

ExecStats NtxEngine::drain_one(std::span<std::byte> tcdm) {
  if (!running_) return {};
  const ExecStats stats = execute_command(*running_, tcdm);
  running_ = queued_;
  queued_.reset();
  return stats;
}

}  // namespace ntx
