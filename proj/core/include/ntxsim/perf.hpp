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
#include <string>
#include <vector>

#include "ntxsim/hwloop.hpp"  // ConfigError
#include "ntxsim/network.hpp"

namespace ntx {

// Analytical performance and energy model of a cube: K clusters, each
// sustaining r_c multiply-accumulates and r_d DMA bytes per engine clock at
// measured utilization efficiencies. Times are seconds, bandwidths bytes/s,
// powers watts, efficiencies FLOP/s/W.

enum class TechNode { k28, k14 };  // logic/DRAM: 28/50 nm or 14/30 nm

struct ArchConfig {
  int clusters = 64;              // K
  int engines_per_cluster = 8;
  double macs_per_cycle = 8.0;    // r_c, per cluster per engine clock
  double dma_bytes_per_cycle = 4.0;  // r_d, per cluster per engine clock
  double freq_hz = 1.5e9;         // engine clock
  double eta_c = 0.84;            // compute utilization
  double eta_d = 0.87;            // DMA utilization
  TechNode node = TechNode::k28;
  double e_cycle_j = 165e-12;     // all-in cluster energy per cycle at 1 V
  double b_max = 320e9;           // internal cube bandwidth cap
  double dram_scale = 1.0;        // DRAM power factor (0.87 at the 30 nm node)

  void validate() const;  // throws ConfigError
};

ArchConfig make_arch(int clusters, double freq_ghz, TechNode node);

// 28 -> 14 nm shrink: 1.4x speed, 0.7x dynamic energy, 0.4x area, and the
// denser DRAM process.
ArchConfig tech_scale(const ArchConfig& a);

// Logic area of all clusters at the configured node.
double total_area_mm2(const ArchConfig& a);

// Builds the config from JSON (keys mirror the field names: clusters,
// freq_ghz, node, eta_c, eta_d, e_cycle_pj, b_max_gbps, macs_per_cycle,
// dma_bytes_per_cycle, dram_scale). Unset keys take the node's defaults.
ArchConfig parse_arch(const std::string& json_text);

struct KernelTiming {
  double t_c = 0.0;     // compute
  double t_dpar = 0.0;  // transfers overlapped with compute
  double t_dseq = 0.0;  // head + tail transfers
  double t_cl = 0.0;    // one cluster, start to drain
  double b_cl = 0.0;    // bytes/s demanded by one cluster
  double p_cl = 0.0;    // watts per cluster
};

// Single-cluster roofline: t_cl = max(t_c, t_dpar) + t_dseq.
KernelTiming kernel_timing(const LayerWorkload& w, const ArchConfig& a);

// Background DRAM power plus the bandwidth-proportional term.
double dram_power(double bytes_per_s, const ArchConfig& a);

struct CubeMetrics {
  double b = 0.0;    // sustained bandwidth, capped
  double t = 0.0;    // execution time
  double p = 0.0;    // cube power (DRAM + clusters)
  double eta = 0.0;  // FLOP/s/W
};

// K-way parallel execution of one workload; hitting the bandwidth cap
// stretches time proportionally.
CubeMetrics cube_metrics(const LayerWorkload& w, const ArchConfig& a);
CubeMetrics cube_metrics(const LayerWorkload& w, const ArchConfig& a,
                         double p_cl);

enum class OffloadArch { kNs, kNtx };

struct OffloadCount {
  std::int64_t offloads = 0;
  std::int64_t cycles = 0;  // busy cycles per offload
};

// A streaming coprocessor needs one offload per output pixel; the nested
// hardware loops take one offload per output slice. Total work is invariant.
OffloadCount offload_counts(const LayerSpec& conv, OffloadArch arch);

struct NetworkMetrics {
  double t = 0.0;        // per image
  double d_bytes = 0.0;  // total DMA traffic
  double b_avg = 0.0;    // d_bytes / t, capped
  double b_peak = 0.0;   // highest per-layer demand, capped
  double p = 0.0;        // worst-case draw (peak-bandwidth DRAM term)
  double eta = 0.0;      // FLOP/s/W
  std::int64_t cycle_ops = 0;  // datapath cycles (MACs + single-slot ops)
  std::int64_t flops = 0;
};

// Layer-by-layer aggregation; the bandwidth cap is applied once to the
// network average. Training runs forward and backward as one overlapped
// stream per layer.
NetworkMetrics network_metrics(const NetworkSpec& n, bool training,
                               const ArchConfig& a);
NetworkMetrics network_metrics(const NetworkSpec& n, bool training,
                               const ArchConfig& a, double p_cl);

// Voltage-frequency scaling: V(f) linear from (f_min, 0.6 V) to
// (f_max, 1.2 V); per-cycle energy scales with (V / 1 V)^2.
struct FreqRange {
  double lo = 0.0, hi = 0.0;
};
FreqRange vfs_range(TechNode node);
double vfs_voltage(double f_hz, TechNode node);
double vfs_cycle_energy(const ArchConfig& a, double f_hz);

// Inclusive grid from f_min to f_max in `step_hz` increments.
std::vector<double> vfs_grid(TechNode node, double step_hz);

struct VfsPoint {
  double f_hz = 0.0;
  double volt = 0.0;
  double e_cycle_j = 0.0;  // voltage-scaled per-cycle energy
  CubeMetrics m;
};

struct VfsResult {
  std::vector<VfsPoint> curve;
  std::size_t best = 0;  // most efficient point within the power budget
};

// Sweeps the workload over the grid; the optimum is the highest-efficiency
// point whose power fits the budget (all points, if none fits).
VfsResult vfs_sweep(const LayerWorkload& w, ArchConfig a,
                    std::span<const double> f_grid, double budget_w = 25.0);

// Columns: f_GHz,V,T_s,B_GBps,P_W,eff_GFLOPsW.
void write_vfs_csv(const VfsResult& r, std::ostream& os);

// Throughput-per-TDP estimate for a reference accelerator.
double gpu_efficiency(double time_per_image_s, double tdp_w,
                      double flops_per_image);

}  // namespace ntx
