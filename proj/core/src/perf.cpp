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
#include "ntxsim/perf.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <json.hpp>

namespace ntx {

namespace {

constexpr double kVNom = 1.0;
// 64 clusters occupy 41.0 mm^2 at 28 nm
constexpr double kClusterArea28 = 41.0 / 64.0;

}  // namespace

void ArchConfig::validate() const {
  if (clusters < 1) throw ConfigError("need at least one cluster");
  if (freq_hz <= 0.0) throw ConfigError("frequency must be positive");
  if (eta_c <= 0.0 || eta_c > 1.0 || eta_d <= 0.0 || eta_d > 1.0)
    throw ConfigError("utilization efficiencies must be in (0, 1]");
  if (macs_per_cycle <= 0.0 || dma_bytes_per_cycle <= 0.0)
    throw ConfigError("per-cycle rates must be positive");
  if (e_cycle_j <= 0.0) throw ConfigError("cycle energy must be positive");
  if (b_max <= 0.0) throw ConfigError("bandwidth cap must be positive");
}

ArchConfig make_arch(int clusters, double freq_ghz, TechNode node) {
  ArchConfig a;
  a.clusters = clusters;
  a.freq_hz = freq_ghz * 1e9;
  a.node = node;
  if (node == TechNode::k14) {
    a.e_cycle_j = 165e-12 * 0.7;
    a.dram_scale = 0.87;
  }
  a.validate();
  return a;
}

ArchConfig tech_scale(const ArchConfig& a) {
  ArchConfig s = a;
  s.node = TechNode::k14;
  s.freq_hz = a.freq_hz * 1.4;
  s.e_cycle_j = a.e_cycle_j * 0.7;
  s.dram_scale = 0.87;
  return s;
}

double total_area_mm2(const ArchConfig& a) {
  const double per_cluster =
      kClusterArea28 * (a.node == TechNode::k14 ? 0.4 : 1.0);
  return a.clusters * per_cluster;
}

ArchConfig parse_arch(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad arch JSON: ") + e.what());
  }
  try {
    const int node_nm = j.value("node", 28);
    if (node_nm != 28 && node_nm != 14)
      throw ConfigError("node must be 28 or 14");
    ArchConfig a = make_arch(j.value("clusters", 64), j.value("freq_ghz", 1.5),
                             node_nm == 14 ? TechNode::k14 : TechNode::k28);
    a.eta_c = j.value("eta_c", a.eta_c);
    a.eta_d = j.value("eta_d", a.eta_d);
    a.macs_per_cycle = j.value("macs_per_cycle", a.macs_per_cycle);
    a.dma_bytes_per_cycle =
        j.value("dma_bytes_per_cycle", a.dma_bytes_per_cycle);
    if (j.contains("e_cycle_pj")) a.e_cycle_j = j.at("e_cycle_pj").get<double>() * 1e-12;
    if (j.contains("b_max_gbps")) a.b_max = j.at("b_max_gbps").get<double>() * 1e9;
    a.dram_scale = j.value("dram_scale", a.dram_scale);
    a.validate();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad arch JSON: ") + e.what());
  }
}

KernelTiming kernel_timing(const LayerWorkload& w, const ArchConfig& a) {
  a.validate();
  KernelTiming t;
  const double cyc = a.freq_hz;
  t.t_c = double(w.n_c()) / (a.eta_c * a.macs_per_cycle * cyc);
  t.t_dpar = w.d_par / (a.eta_d * a.dma_bytes_per_cycle * cyc);
  t.t_dseq = (w.d_head + w.d_tail) / (a.eta_d * a.dma_bytes_per_cycle * cyc);
  t.t_cl = std::max(t.t_c, t.t_dpar) + t.t_dseq;
  t.b_cl = t.t_cl > 0.0 ? w.d_dma() / t.t_cl : 0.0;
  t.p_cl = a.e_cycle_j * a.freq_hz;
  return t;
}

double dram_power(double bytes_per_s, const ArchConfig& a) {
  return (7.9 + 0.0215 * bytes_per_s / 1e9) * a.dram_scale;
}

CubeMetrics cube_metrics(const LayerWorkload& w, const ArchConfig& a) {
  return cube_metrics(w, a, a.e_cycle_j * a.freq_hz);
}

CubeMetrics cube_metrics(const LayerWorkload& w, const ArchConfig& a,
                         double p_cl) {
  const KernelTiming kt = kernel_timing(w, a);
  CubeMetrics m;
  m.t = kt.t_cl / a.clusters;
  m.b = a.clusters * kt.b_cl;
  if (m.b > a.b_max) {
    m.t *= m.b / a.b_max;  // throttled: same traffic over a longer window
    m.b = a.b_max;
  }
  m.p = dram_power(m.b, a) + a.clusters * p_cl;
  m.eta = m.t > 0.0 ? double(w.flops()) / (m.p * m.t) : 0.0;
  return m;
}

OffloadCount offload_counts(const LayerSpec& conv, OffloadArch arch) {
  if (conv.kind != LayerKind::kConv)
    throw ConfigError("offload counts are defined for convolutions");
  const std::int64_t pixels = std::int64_t(conv.out.h) * conv.out.w;
  const std::int64_t reduction =
      std::int64_t(conv.kh) * conv.kw * conv.in.c;
  if (arch == OffloadArch::kNs) return {pixels * conv.out.c, reduction};
  return {conv.out.c, pixels * reduction};
}

NetworkMetrics network_metrics(const NetworkSpec& n, bool training,
                               const ArchConfig& a) {
  return network_metrics(n, training, a, a.e_cycle_j * a.freq_hz);
}

NetworkMetrics network_metrics(const NetworkSpec& n, bool training,
                               const ArchConfig& a, double p_cl) {
  a.validate();
  NetworkMetrics m;
  for (const auto& l : n.layers) {
    LayerWorkload w = layer_workload(l, Pass::kForward);
    if (training) {
      const LayerWorkload b = layer_workload(l, Pass::kBackward);
      w.macs += b.macs;
      w.other_ops += b.other_ops;
      w.d_head += b.d_head;
      w.d_par += b.d_par;
      w.d_tail += b.d_tail;
    }
    const KernelTiming kt = kernel_timing(w, a);
    m.t += kt.t_cl / a.clusters * l.repeat;
    m.d_bytes += w.d_dma() * l.repeat;
    m.cycle_ops += w.n_c() * l.repeat;
    m.flops += w.flops() * l.repeat;
    m.b_peak = std::max(m.b_peak, a.clusters * kt.b_cl);
  }
  m.b_avg = m.t > 0.0 ? m.d_bytes / m.t : 0.0;
  if (m.b_avg > a.b_max) {
    m.t *= m.b_avg / a.b_max;
    m.b_avg = a.b_max;
  }
  m.b_peak = std::min(m.b_peak, a.b_max);
  m.p = dram_power(m.b_peak, a) + a.clusters * p_cl;
  m.eta = m.t > 0.0 ? double(m.flops) / (m.p * m.t) : 0.0;
  return m;
}

FreqRange vfs_range(TechNode node) {
  return node == TechNode::k28 ? FreqRange{0.1e9, 2.5e9}
                               : FreqRange{0.14e9, 3.5e9};
}

double vfs_voltage(double f_hz, TechNode node) {
  const FreqRange r = vfs_range(node);
  if (f_hz < r.lo || f_hz > r.hi)
    throw ConfigError("frequency outside the node's scaling range");
  return 0.6 + (f_hz - r.lo) / (r.hi - r.lo) * 0.6;
}

double vfs_cycle_energy(const ArchConfig& a, double f_hz) {
  const double v = vfs_voltage(f_hz, a.node) / kVNom;
  return a.e_cycle_j * v * v;
}

std::vector<double> vfs_grid(TechNode node, double step_hz) {
  if (step_hz <= 0.0) throw ConfigError("grid step must be positive");
  const FreqRange r = vfs_range(node);
  const int n = static_cast<int>(std::llround((r.hi - r.lo) / step_hz));
  std::vector<double> g;
  g.reserve(n + 1);
  for (int i = 0; i <= n; ++i) g.push_back(r.lo + i * step_hz);
  return g;
}

VfsResult vfs_sweep(const LayerWorkload& w, ArchConfig a,
                    std::span<const double> f_grid, double budget_w) {
  VfsResult res;
  bool within = false;
  for (double f : f_grid) {
    VfsPoint pt;
    pt.f_hz = f;
    pt.volt = vfs_voltage(f, a.node);
    pt.e_cycle_j = vfs_cycle_energy(a, f);
    a.freq_hz = f;
    pt.m = cube_metrics(w, a, pt.e_cycle_j * f);
    res.curve.push_back(pt);
    const std::size_t i = res.curve.size() - 1;
    const bool fits = pt.m.p <= budget_w;
    const VfsPoint& best = res.curve[res.best];
    if ((fits && !within) || (fits == within && pt.m.eta > best.m.eta)) {
      res.best = i;
      within = fits;
    }
  }
  return res;
}

void write_vfs_csv(const VfsResult& r, std::ostream& os) {
  os << "f_GHz,V,T_s,B_GBps,P_W,eff_GFLOPsW\n";
  for (const auto& p : r.curve)
    os << p.f_hz / 1e9 << ',' << p.volt << ',' << p.m.t << ',' << p.m.b / 1e9
       << ',' << p.m.p << ',' << p.m.eta / 1e9 << '\n';
}

double gpu_efficiency(double time_per_image_s, double tdp_w,
                      double flops_per_image) {
  if (time_per_image_s <= 0.0 || tdp_w <= 0.0 || flops_per_image <= 0.0)
    throw ConfigError("estimator inputs must be positive");
  return flops_per_image / time_per_image_s / tdp_w;
}

}  // namespace ntx
