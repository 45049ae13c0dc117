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

#include "ntxsim/hwloop.hpp"  // ConfigError

namespace ntx {

// Replacing the accelerator complement of a training server with cubes,
// either matching its peak compute or filling its thermal budget.

struct ServerBaseline {
  double total_w = 3200.0;      // wall power of the whole server
  double gpu_w = 2400.0;        // accelerator share of it
  double gpu_peak_tflops = 84.8;
  double dram_gb = 512.0;       // system memory the cubes absorb
  double dram_w_per_16gb = 6.0;
  // Published savings figure for retiring the system DRAM; the dram_gb
  // arithmetic above gives 192 W, the figure quoted alongside it is 128 W.
  double dram_savings_w = 128.0;
  double pue_factor = 1.12;     // facility overhead applied to saved power
  double price_per_kwh = 0.1104;

  double computed_dram_savings_w() const {
    return dram_gb / 16.0 * dram_w_per_16gb;
  }
  void validate() const;  // throws ConfigError
};

struct CubeOffer {
  double peak_tflops = 2.007;  // at the chosen operating point
  double power_w = 20.0;
  double dram_gb = 8.0;        // memory each cube contributes

  void validate() const;  // throws ConfigError
};

struct SameComputeResult {
  int cubes = 0;           // fewest cubes matching the accelerator peak
  double cube_power_w = 0.0;
  double saved_w = 0.0;    // accelerators + DRAM out, cubes in
  double reduction = 0.0;  // server wall power, before / after
  double usd_per_year = 0.0;
};

SameComputeResult same_compute(const ServerBaseline& b, const CubeOffer& c);

struct SameTdpResult {
  int cubes = 0;  // most cubes fitting the thermal budget
  double total_tflops = 0.0;
  double ratio = 0.0;  // vs the accelerator peak
};

SameTdpResult same_tdp(const ServerBaseline& b, const CubeOffer& c,
                       double budget_w);

}  // namespace ntx
