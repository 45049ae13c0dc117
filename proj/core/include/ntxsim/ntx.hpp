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
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>

#include "ntxsim/hwloop.hpp"

namespace ntx {

enum class Opcode {
  kMac,         // acc += a0 * a1 over each init block, store reduce()
  kVMult,       // acc = scalar; acc += a0 * a1; elementwise with unit blocks
  kVAdd,        // acc = scalar; acc += a0; acc += a1
  kOuterP,      // product like kVMult, streams strided for outer products
  kMin,         // running strict minimum, seeded from scalar
  kMax,         // running strict maximum, seeded from scalar
  kArgMax,      // like kMax but stores the flat in-block index (uint32)
  kRelu,        // out = max(a0, scalar)
  kThreshMask,  // out = a0 > scalar ? a1 : 0
  kCopy,        // out = a0
  kMemset,      // out = scalar
};

// How many read streams an opcode consumes (AGU0 first, then AGU1).
int read_streams(Opcode op);

// Fixed pipeline drain cost added to every command's busy time; reduction
// and write-back tail, not part of the per-iteration throughput.
inline constexpr std::uint64_t kDrainCycles = 4;

struct NtxCommand {
  Opcode opcode = Opcode::kMac;
  HwlConfig hwl;
  std::array<AguConfig, 3> agu{};  // [0],[1] read streams, [2] write stream
  float scalar = 0.0f;             // accumulator seed / threshold / fill value
};

struct ExecStats {
  std::uint64_t inner_iters = 0;  // product of active loop bounds
  std::uint64_t busy_cycles = 0;  // inner_iters + kDrainCycles
  bool invalid = false;           // accumulator absorbed NaN/Inf
};

// Run one command to completion against a TCDM byte window. All element
// accesses are 4-byte words; out-of-window or misaligned accesses raise
// AddressFault carrying the loop index tuple.
ExecStats execute_command(const NtxCommand& cmd, std::span<std::byte> tcdm);

// Offload front end: live staging registers, a shadow copy the running
// command executes from, and a single queue slot behind it.
class NtxEngine {
 public:
  NtxCommand& staging() { return staging_; }
  const NtxCommand& staging() const { return staging_; }

  // Snapshot the live registers behind the running command. False means
  // both the runner and the queue slot are occupied: back-pressure, the
  // driver must retry after a drain.
  bool issue();

  bool busy() const { return running_.has_value(); }
  int outstanding() const;

  // Execute the oldest outstanding command; the queued one (if any) becomes
  // the runner. Returns the stats of the drained command.
  ExecStats drain_one(std::span<std::byte> tcdm);

 private:
  NtxCommand staging_;
  std::optional<NtxCommand> running_;
  std::optional<NtxCommand> queued_;
};

}  // namespace ntx
