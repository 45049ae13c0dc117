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

#include "ntxsim/hwloop.hpp"  // ConfigError

namespace ntx {

// Data-parallel scaling of an N x N mesh of cubes. After every batch the
// weight deltas ripple through the mesh in four systolic waves (one per
// direction); compute and update phases are strictly sequential.

struct MeshConfig {
  int n = 16;                    // mesh side
  double link_bw = 61.44e9;      // effective link bandwidth, bytes/s
                                 // (16 lanes x 30.72 Gb/s)
  double t_lat = 20e-6;          // per-hop forwarding latency, s
  double weight_bytes = 300e6;   // full weight-update payload
  double p_cube = 21.0;          // W, cube busy power
  double p_link = 8.0;           // W, one active link
  double t_step_img = 8.69e-3;   // s per image per cube
  double t_powercycle = 50e-3;   // link power-up plus power-down window, s

  void validate() const;  // throws ConfigError
};

struct MeshTime {
  double t_tx = 0.0;      // one full payload over one link
  double t_pass = 0.0;    // one systolic wave across the mesh
  double t_update = 0.0;  // all four waves
  double t_step = 0.0;    // batch compute, data-parallel
  double t_total = 0.0;
  double speedup = 0.0;       // vs one cube running the whole batch
  double parallel_eff = 0.0;  // speedup / N^2
  bool idle_cubes = false;    // batch smaller than the mesh
};

MeshTime mesh_time(const MeshConfig& m, std::int64_t batch);

struct MeshEnergy {
  double e_pass = 0.0;    // per cube, one wave
  double e_pwrud = 0.0;   // per cube, link power cycling
  double e_update = 0.0;  // per cube, all waves plus power cycling
  double e_step_total = 0.0;  // whole mesh, batch compute
  double e_total = 0.0;
  double energy_eff = 0.0;  // vs one cube spending compute energy only
};

MeshEnergy mesh_energy(const MeshConfig& m, std::int64_t batch);

// One row per (side, batch) pair:
// N,L_B,speedup,parallel_eff,energy_eff.
void write_mesh_grid_csv(const MeshConfig& base, std::span<const int> sides,
                         std::span<const std::int64_t> batches,
                         std::ostream& os);

}  // namespace ntx
