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
#include <span>
#include <vector>

namespace ntx {

// Iterative math routines the co-processor has no direct instruction for.
// Each one is a short program: the controller core seeds per-element state
// (reciprocal table lookups, exponent splits) and the heavy lifting runs as
// elementwise fused multiply-add command passes. Cycles count both sides:
// command issue + busy time, and the core's per-element software steps.
enum class SpecialFn { kDiv, kSqrt, kRsqrt, kExp, kLog };

struct SpecialResult {
  std::vector<float> values;
  std::uint64_t cycles = 0;
  bool domain_violation = false;  // some input produced NaN (e.g. sqrt(-1))
};

// b is the denominator batch for kDiv and ignored otherwise.
SpecialResult special_function(SpecialFn fn, std::span<const float> a,
                               std::span<const float> b = {});

}  // namespace ntx
