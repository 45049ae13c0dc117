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

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ntxsim/ntx.hpp"

namespace ntx {

// One processing cluster: a banked scratchpad shared by the co-processors,
// a 2-D strided DMA to external memory, and the driver core that sequences
// double-buffered tile schedules. The simulation is cycle-stepped and fully
// deterministic; values never depend on timing.

inline constexpr std::int64_t kTcdmCapacityBytes = 128 * 1024;
inline constexpr int kTcdmBanks = 32;  // word-interleaved
inline constexpr std::int64_t kDmaBytesPerCycle = 4;
inline constexpr std::int64_t kDramLatencyCycles = 40;
// Driver cost model: one cycle per staging-area register write (a command
// body is 28 registers), ten cycles to program a DMA descriptor.
inline constexpr std::int64_t kCommandProgramCycles = 28;
inline constexpr std::int64_t kDescriptorProgramCycles = 10;

struct ScheduleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline int tcdm_bank(std::int64_t byte_addr) {
  return static_cast<int>((byte_addr / 4) % kTcdmBanks);
}

struct TcdmRequest {
  int unit = 0;
  int bank = 0;
  bool write = false;
};

// Outcome of one arbitration round: index lists into the request span.
// Per bank exactly one grant; priority rotates with `rotation` (callers pass
// the cycle count) so sustained conflicts share the bank fairly.
struct Arbitration {
  std::vector<std::size_t> granted;
  std::vector<std::size_t> stalled;
};
Arbitration tcdm_arbitrate(std::span<const TcdmRequest> requests, int rotation);

// A 2-D DMA transfer: `rows` rows of `row_bytes`, each row one burst.
struct DmaDescriptor {
  std::int64_t dram_base = 0;
  std::int64_t dram_stride = 0;
  std::int64_t tcdm_base = 0;
  std::int64_t tcdm_stride = 0;
  std::int64_t row_bytes = 0;
  int rows = 0;
  bool to_tcdm = true;
};

struct DmaResult {
  std::vector<std::int64_t> bursts;  // bytes, one entry per row
  std::int64_t transfer_cycles = 0;  // excludes the fixed DRAM latency
};
// Functional copy plus burst accounting. Throws ConfigError on malformed
// descriptors and AddressFault when a row leaves either memory.
DmaResult dma_execute(const DmaDescriptor& d, std::span<std::byte> dram,
                      std::span<std::byte> tcdm);

// Zero ring written by the driver core around an interior already placed by
// the DMA: interior_h x interior_w words at `base` plus the given margins.
struct PadSpec {
  std::int64_t base = 0;  // byte address of the padded buffer origin
  int interior_h = 0, interior_w = 0;
  int top = 0, bottom = 0, left = 0, right = 0;
};
// Returns the word addresses written (each costs the core one TCDM write).
std::vector<std::int64_t> zero_pad_rows(const PadSpec& p,
                                        std::span<std::byte> tcdm);

// One double-buffering step. Head transfers land before any command of the
// phase issues; parallel transfers overlap the compute; tail transfers start
// only after every command of the phase retired.
struct TilePhase {
  struct Launch {
    int unit = 0;  // co-processor index
    NtxCommand cmd;
  };
  std::vector<DmaDescriptor> head, parallel, tail;
  std::vector<PadSpec> pads;  // applied by the core alongside the head stage
  std::vector<Launch> commands;
};

struct TileSchedule {
  std::vector<TilePhase> phases;
};

struct ClusterTrace {
  std::int64_t cycles = 0;
  std::vector<std::string> unit_names;     // core, dma, ntx0..
  std::vector<std::int64_t> busy_cycles;   // per unit, same order
  std::int64_t requests_serviced = 0;
  std::int64_t requests_stalled = 0;
  std::vector<std::int64_t> bursts;        // bytes per DMA row, all phases
  // Optional per-cycle state matrix [cycle][unit]: 0 idle, 1 busy, 2 stall.
  std::vector<std::vector<std::uint8_t>> timeline;

  double busy_fraction(std::size_t unit) const {
    return cycles ? double(busy_cycles[unit]) / double(cycles) : 0.0;
  }
  double service_fraction() const {
    const double offered = double(requests_serviced + requests_stalled);
    return offered > 0 ? double(requests_serviced) / offered : 1.0;
  }
};

struct ClusterOptions {
  int n_ntx = 8;
  bool keep_timeline = false;
};

// Reference execution: all phases strictly in order, no overlap. Defines the
// memory effects every valid schedule must reproduce.
void run_schedule_sequential(const TileSchedule& ts, std::span<std::byte> dram);

// Cycle-accurate run. Validates dependencies (parallel transfers and pads
// must not touch regions the phase's commands use), applies the functional
// effects, and simulates the timing. `dram` is mutated.
ClusterTrace run_tile_schedule(const TileSchedule& ts, std::span<std::byte> dram,
                               const ClusterOptions& opt = {});

// CSV with one row per (cycle, unit): cycle,unit,state. Requires a trace
// recorded with keep_timeline.
void write_trace_csv(const ClusterTrace& t, std::ostream& os);
// CSV histogram: length_bytes,count,bytes_total (ascending by length).
void write_burst_histogram_csv(const ClusterTrace& t, std::ostream& os);

// Demonstration tiling of a 3x3 convolution (8 input / 8 output channels,
// 16x16 output tile, unit padding) across `tiles` double-buffered tiles:
// head loads the first inputs and the weights, steady-state phases overlap
// the next load and previous store with the compute, tail drains the last
// result. Every DMA row moves at least 8 words.
struct ReferenceConvTiling {
  TileSchedule schedule;
  std::int64_t dram_bytes = 0;      // backing store size the schedule expects
  std::int64_t x_bytes_per_tile = 0;
  std::int64_t y_bytes_per_tile = 0;
  std::int64_t w_bytes = 0;
  std::int64_t macs_per_tile = 0;
  std::int64_t ntx_cycles_per_tile = 0;  // per-unit busy cycles incl. drains
};
ReferenceConvTiling make_reference_conv_tiling(int tiles);

}  // namespace ntx
