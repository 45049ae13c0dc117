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
#include "ntxsim/datacenter.hpp"

#include <cmath>

namespace ntx {

namespace {
constexpr double kHoursPerYear = 8760.0;
}  // namespace

void ServerBaseline::validate() const {
  if (total_w <= 0.0) throw ConfigError("server power must be positive");
  if (gpu_w <= 0.0 || gpu_w >= total_w)
    throw ConfigError("accelerator power must be positive and below the "
                      "server total");
  if (gpu_peak_tflops <= 0.0)
    throw ConfigError("accelerator peak must be positive");
  if (dram_gb < 0.0 || dram_w_per_16gb < 0.0 || dram_savings_w < 0.0)
    throw ConfigError("DRAM figures must be non-negative");
  if (pue_factor < 1.0) throw ConfigError("PUE factor must be at least 1");
  if (price_per_kwh < 0.0) throw ConfigError("price must be non-negative");
}

void CubeOffer::validate() const {
  if (peak_tflops <= 0.0) throw ConfigError("cube peak must be positive");
  if (power_w <= 0.0) throw ConfigError("cube power must be positive");
  if (dram_gb < 0.0) throw ConfigError("cube DRAM must be non-negative");
}

SameComputeResult same_compute(const ServerBaseline& b, const CubeOffer& c) {
  b.validate();
  c.validate();
  SameComputeResult r;
  r.cubes = int(std::ceil(b.gpu_peak_tflops / c.peak_tflops));
  r.cube_power_w = r.cubes * c.power_w;
  r.saved_w = b.gpu_w + b.dram_savings_w - r.cube_power_w;
  r.reduction = b.total_w / (b.total_w - r.saved_w);
  r.usd_per_year =
      r.saved_w * b.pue_factor / 1000.0 * kHoursPerYear * b.price_per_kwh;
  return r;
}

SameTdpResult same_tdp(const ServerBaseline& b, const CubeOffer& c,
                       double budget_w) {
  b.validate();
  c.validate();
  if (budget_w < c.power_w)
    throw ConfigError("thermal budget below a single cube");
  SameTdpResult r;
  r.cubes = int(std::floor(budget_w / c.power_w));
  r.total_tflops = r.cubes * c.peak_tflops;
  r.ratio = r.total_tflops / b.gpu_peak_tflops;
  return r;
}

}  // namespace ntx
