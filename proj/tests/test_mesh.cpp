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
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "ntxsim/mesh.hpp"

using namespace ntx;

namespace {

// Hand-computed from the model constants; any drift here is a real change.
constexpr double kTxS = 0.0048828125;         // 300e6 / 61.44e9, exact
constexpr double kPass16S = 0.0052028125;     // + 16 hops
constexpr double kUpdate16S = 0.02081125;     // four waves
constexpr double kEPass16J = 0.1508815625;    // 29 W over one wave
constexpr double kEPwrudJ = 0.8;              // 2 x 8 W x 50 ms, exact
constexpr double kEUpdate16J = 1.40352625;
constexpr double kSpeedup8 = 62.860;          // N=8,  L_B=8192
constexpr double kSpeedup12 = 138.269;        // N=12, L_B=8192
constexpr double kEnergyEff8 = 0.94403;
constexpr double kEnergyEff12 = 0.88160;

}  // namespace

TEST_CASE("weight update wave timing at the full mesh size") {
  MeshConfig m;  // defaults: 16x16, 61.44 GB/s links
  const MeshTime t = mesh_time(m, 65536);
  CHECK(t.t_tx == kTxS);
  CHECK(t.t_pass == doctest::Approx(kPass16S).epsilon(1e-12));
  CHECK(t.t_update == doctest::Approx(kUpdate16S).epsilon(1e-12));
  // Rounded figures the design is quoted at.
  CHECK(t.t_pass == doctest::Approx(5.20e-3).epsilon(5e-3));
  CHECK(t.t_update == doctest::Approx(20.8e-3).epsilon(5e-3));
}

TEST_CASE("weight update energy at the full mesh size") {
  MeshConfig m;
  const MeshEnergy e = mesh_energy(m, 65536);
  CHECK(e.e_pass == doctest::Approx(kEPass16J).epsilon(1e-12));
  CHECK(e.e_pwrud == kEPwrudJ);
  CHECK(e.e_update == doctest::Approx(kEUpdate16J).epsilon(1e-12));
  CHECK(e.e_pass == doctest::Approx(150.9e-3).epsilon(5e-3));
  CHECK(e.e_update == doctest::Approx(1.403).epsilon(5e-3));
}

TEST_CASE("batch-parallel speedup at quoted operating points") {
  MeshConfig m;
  m.n = 8;
  MeshTime t = mesh_time(m, 8192);
  CHECK(t.speedup == doctest::Approx(kSpeedup8).epsilon(1e-3));
  CHECK(t.speedup == doctest::Approx(62.8).epsilon(1e-2));
  CHECK(std::abs(t.parallel_eff - 0.98) < 0.003);

  m.n = 12;
  t = mesh_time(m, 8192);
  CHECK(t.speedup == doctest::Approx(kSpeedup12).epsilon(1e-3));
  CHECK(t.speedup == doctest::Approx(138.0).epsilon(1e-2));
  CHECK(std::abs(t.parallel_eff - 0.958) < 0.003);
}

TEST_CASE("energy efficiency at quoted operating points") {
  MeshConfig m;
  m.n = 8;
  MeshEnergy e = mesh_energy(m, 8192);
  CHECK(e.energy_eff == doctest::Approx(kEnergyEff8).epsilon(1e-3));
  CHECK(std::abs(e.energy_eff - 0.943) < 0.003);

  m.n = 12;
  e = mesh_energy(m, 8192);
  CHECK(e.energy_eff == doctest::Approx(kEnergyEff12).epsilon(1e-3));
  CHECK(std::abs(e.energy_eff - 0.881) < 0.003);
}

TEST_CASE("compute energy is independent of how the batch is split") {
  // t_step * N^2 * P_cube == t_step_img * L_B * P_cube for every N.
  MeshConfig m;
  const double want = m.t_step_img * 8192 * m.p_cube;
  for (int n : {1, 3, 8, 16}) {
    m.n = n;
    CHECK(mesh_energy(m, 8192).e_step_total ==
          doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("speedup is bounded by the cube count and efficiency by one") {
  MeshConfig m;
  for (int n : {1, 2, 4, 8, 12, 16}) {
    m.n = n;
    for (std::int64_t b : {std::int64_t(256), std::int64_t(1024),
                           std::int64_t(8192), std::int64_t(65536)}) {
      const MeshTime t = mesh_time(m, b);
      const MeshEnergy e = mesh_energy(m, b);
      CHECK(t.speedup > 0.0);
      CHECK(t.speedup <= double(n) * double(n));
      CHECK(t.parallel_eff > 0.0);
      CHECK(t.parallel_eff <= 1.0);
      CHECK(e.energy_eff > 0.0);
      CHECK(e.energy_eff <= 1.0);
    }
  }
}

TEST_CASE("larger batches amortize the update, larger meshes dilute it") {
  MeshConfig m;
  m.n = 8;
  double prev = 0.0;
  for (std::int64_t b : {std::int64_t(256), std::int64_t(1024),
                         std::int64_t(4096), std::int64_t(16384)}) {
    const MeshTime t = mesh_time(m, b);
    CHECK(t.parallel_eff > prev);
    prev = t.parallel_eff;
  }
  prev = 2.0;
  for (int n : {2, 4, 8, 12, 16}) {
    m.n = n;
    const MeshTime t = mesh_time(m, 8192);
    CHECK(t.parallel_eff < prev);
    prev = t.parallel_eff;
  }
}

TEST_CASE("free updates recover perfect scaling") {
  MeshConfig m;
  m.t_lat = 0.0;
  m.weight_bytes = 0.0;
  m.t_powercycle = 0.0;
  for (int n : {8, 16}) {  // power-of-two split stays exact in binary
    m.n = n;
    const MeshTime t = mesh_time(m, 4096);
    CHECK(t.speedup == double(n) * double(n));
    CHECK(t.parallel_eff == 1.0);
    CHECK(mesh_energy(m, 4096).energy_eff == 1.0);
  }
  m.n = 12;
  const MeshTime t = mesh_time(m, 4096);
  CHECK(t.speedup == doctest::Approx(144.0).epsilon(1e-12));
  CHECK(mesh_energy(m, 4096).energy_eff ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a batch smaller than the mesh flags idle cubes") {
  MeshConfig m;  // 256 cubes
  CHECK(mesh_time(m, 255).idle_cubes);
  CHECK_FALSE(mesh_time(m, 256).idle_cubes);
  // Still a valid operating point, just a poor one.
  CHECK(mesh_time(m, 1).speedup > 0.0);
}

TEST_CASE("slower link option shifts the wave time") {
  MeshConfig m;
  m.link_bw = 60e9;
  const MeshTime t = mesh_time(m, 8192);
  CHECK(t.t_tx == doctest::Approx(5.0e-3).epsilon(1e-12));
  CHECK(t.t_pass == doctest::Approx(5.32e-3).epsilon(1e-12));
}

TEST_CASE("mesh rejects nonsense configurations") {
  MeshConfig m;
  m.n = 0;
  CHECK_THROWS_AS(mesh_time(m, 1), ConfigError);
  m = MeshConfig{};
  CHECK_THROWS_AS(mesh_time(m, 0), ConfigError);
  m.p_cube = 0.0;
  CHECK_THROWS_AS(mesh_time(m, 1), ConfigError);
  m = MeshConfig{};
  m.link_bw = -1.0;
  CHECK_THROWS_AS(mesh_energy(m, 1), ConfigError);
}

TEST_CASE("scaling grid CSV is well-formed and deterministic") {
  MeshConfig m;
  const std::vector<int> sides = {4, 8};
  const std::vector<std::int64_t> batches = {1024, 8192};
  std::ostringstream a, b;
  write_mesh_grid_csv(m, sides, batches, a);
  write_mesh_grid_csv(m, sides, batches, b);
  CHECK(a.str() == b.str());

  std::istringstream in(a.str());
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "N,L_B,speedup,parallel_eff,energy_eff");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::istringstream ls(line);
    std::string field;
    int fields = 0;
    while (std::getline(ls, field, ',')) ++fields;
    CHECK(fields == 5);
    if (rows == 4) {  // last row: N=8, L_B=8192
      std::istringstream vs(line);
      double n, lb, sp;
      char c;
      vs >> n >> c >> lb >> c >> sp;
      CHECK(n == 8);
      CHECK(lb == 8192);
      CHECK(sp == doctest::Approx(kSpeedup8).epsilon(1e-3));
    }
  }
  CHECK(rows == 4);
}
