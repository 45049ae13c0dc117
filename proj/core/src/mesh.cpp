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
#include "ntxsim/mesh.hpp"

#include <ostream>

namespace ntx {

void MeshConfig::validate() const {
  if (n < 1) throw ConfigError("mesh side must be at least 1");
  if (link_bw <= 0.0) throw ConfigError("link bandwidth must be positive");
  if (t_lat < 0.0) throw ConfigError("hop latency must be non-negative");
  if (weight_bytes < 0.0) throw ConfigError("payload must be non-negative");
  if (p_cube <= 0.0) throw ConfigError("cube power must be positive");
  if (p_link < 0.0) throw ConfigError("link power must be non-negative");
  if (t_step_img <= 0.0) throw ConfigError("step time must be positive");
  if (t_powercycle < 0.0)
    throw ConfigError("power-cycle window must be non-negative");
}

MeshTime mesh_time(const MeshConfig& m, std::int64_t batch) {
  m.validate();
  if (batch < 1) throw ConfigError("batch must be at least 1");
  const double cubes = double(m.n) * double(m.n);
  MeshTime t;
  t.t_tx = m.weight_bytes / m.link_bw;
  t.t_pass = t.t_tx + m.n * m.t_lat;
  t.t_update = 4.0 * t.t_pass;
  t.t_step = m.t_step_img * double(batch) / cubes;
  t.t_total = t.t_update + t.t_step;
  t.speedup = m.t_step_img * double(batch) / t.t_total;
  t.parallel_eff = t.speedup / cubes;
  t.idle_cubes = double(batch) < cubes;
  return t;
}

MeshEnergy mesh_energy(const MeshConfig& m, std::int64_t batch) {
  const MeshTime t = mesh_time(m, batch);
  const double cubes = double(m.n) * double(m.n);
  MeshEnergy e;
  e.e_pass = t.t_pass * (m.p_cube + m.p_link);
  e.e_pwrud = 2.0 * m.p_link * m.t_powercycle;
  e.e_update = 4.0 * e.e_pass + e.e_pwrud;
  e.e_step_total = t.t_step * m.p_cube * cubes;
  e.e_total = e.e_step_total + cubes * e.e_update;
  e.energy_eff = m.t_step_img * double(batch) * m.p_cube / e.e_total;
  return e;
}

void write_mesh_grid_csv(const MeshConfig& base, std::span<const int> sides,
                         std::span<const std::int64_t> batches,
                         std::ostream& os) {
  os << "N,L_B,speedup,parallel_eff,energy_eff\n";
  MeshConfig m = base;
  for (int n : sides) {
    m.n = n;
    for (std::int64_t b : batches) {
      const MeshTime t = mesh_time(m, b);
      const MeshEnergy e = mesh_energy(m, b);
      os << n << ',' << b << ',' << t.speedup << ',' << t.parallel_eff << ','
         << e.energy_eff << '\n';
    }
  }
}

}  // namespace ntx
