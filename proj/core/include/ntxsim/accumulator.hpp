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

namespace ntx {

// Fixed-point accumulator wide enough to hold any product of two float32
// values exactly. Sums are associative and order independent; a single
// round-to-nearest-even happens in reduce().
//
// Layout: 640-bit two's complement, bit 0 weighs 2^-298. The smallest
// product of two nonzero floats is 2^-149 * 2^-149 = 2^-298 and the largest
// sits below 2^554, leaving 85 guard bits under the sign for carries.
class WideAccumulator {
 public:
  WideAccumulator() { clear(); }

  void clear();

  // Accumulate a single value / an exact product a*b.
  void add(float x);
  void fmac(float a, float b);

  // Round the current sum to float32 (one RNE rounding, subnormals exact
  // until the final rounding too). NaN/Inf inputs poison the sum.
  float reduce() const;

  // True once a NaN was absorbed or opposite infinities collided.
  bool invalid() const;

  static constexpr int kLimbs = 640 / 64;
  static constexpr int kBias = 298;  // bit index of weight 2^0

 private:
  void add_shifted(std::uint64_t mag, int shift, bool negative);

  std::uint64_t limb_[kLimbs];
  bool saw_nan_;
  bool pos_inf_;
  bool neg_inf_;
};

}  // namespace ntx
