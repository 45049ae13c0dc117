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
#include "ntxsim/accumulator.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

namespace ntx {
namespace {

struct Unpacked {
  bool neg;
  bool inf;
  bool nan;
  std::uint32_t mag;  // < 2^24, value = +-mag * 2^exp
  int exp;
};

Unpacked unpack(float x) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(x);
  Unpacked u{};
  u.neg = (bits >> 31) != 0;
  const int e = static_cast<int>((bits >> 23) & 0xFF);
  const std::uint32_t mant = bits & 0x7FFFFF;
  if (e == 0xFF) {
    u.inf = mant == 0;
    u.nan = mant != 0;
  } else if (e == 0) {
    u.mag = mant;
    u.exp = -149;
  } else {
    u.mag = mant | 0x800000;
    u.exp = e - 150;
  }
  return u;
}

}  // namespace

void WideAccumulator::clear() {
  std::memset(limb_, 0, sizeof(limb_));
  saw_nan_ = false;
  pos_inf_ = false;
  neg_inf_ = false;
}

bool WideAccumulator::invalid() const {
  return saw_nan_ || (pos_inf_ && neg_inf_);
}

void WideAccumulator::add_shifted(std::uint64_t mag, int shift, bool negative) {
  const int limb = shift >> 6;
  const int off = shift & 63;
  const unsigned __int128 wide = static_cast<unsigned __int128>(mag) << off;
  std::uint64_t part[2] = {static_cast<std::uint64_t>(wide),
                           static_cast<std::uint64_t>(wide >> 64)};
  if (negative) {
    unsigned borrow = 0;
    for (int i = limb, j = 0; i < kLimbs; ++i, ++j) {
      const std::uint64_t sub = (j < 2 ? part[j] : 0);
      const std::uint64_t before = limb_[i];
      limb_[i] = before - sub - borrow;
      borrow = (before < sub || (borrow && before == sub)) ? 1 : 0;
      if (j >= 2 && borrow == 0) break;
    }
  } else {
    unsigned carry = 0;
    for (int i = limb, j = 0; i < kLimbs; ++i, ++j) {
      const std::uint64_t addv = (j < 2 ? part[j] : 0);
      const unsigned __int128 sum =
          static_cast<unsigned __int128>(limb_[i]) + addv + carry;
      limb_[i] = static_cast<std::uint64_t>(sum);
      carry = static_cast<unsigned>(sum >> 64);
      if (j >= 2 && carry == 0) break;
    }
  }
}

void WideAccumulator::add(float x) {
  const Unpacked u = unpack(x);
  if (u.nan) {
    saw_nan_ = true;
    return;
  }
  if (u.inf) {
    (u.neg ? neg_inf_ : pos_inf_) = true;
    return;
  }
  if (u.mag == 0) return;
  add_shifted(u.mag, u.exp + kBias, u.neg);
}

void WideAccumulator::fmac(float a, float b) {
  const Unpacked ua = unpack(a);
  const Unpacked ub = unpack(b);
  if (ua.nan || ub.nan) {
    saw_nan_ = true;
    return;
  }
  const bool neg = ua.neg != ub.neg;
  if (ua.inf || ub.inf) {
    // 0 * inf is invalid, like the fused multiply in hardware.
    if ((ua.inf && !ub.inf && ub.mag == 0) ||
        (ub.inf && !ua.inf && ua.mag == 0)) {
      saw_nan_ = true;
    } else {
      (neg ? neg_inf_ : pos_inf_) = true;
    }
    return;
  }
  const std::uint64_t prod =
      static_cast<std::uint64_t>(ua.mag) * static_cast<std::uint64_t>(ub.mag);
  if (prod == 0) return;
  add_shifted(prod, ua.exp + ub.exp + kBias, neg);
}

float WideAccumulator::reduce() const {
  if (invalid()) return std::numeric_limits<float>::quiet_NaN();
  if (pos_inf_) return std::numeric_limits<float>::infinity();
  if (neg_inf_) return -std::numeric_limits<float>::infinity();

  std::uint64_t mag[kLimbs];
  std::memcpy(mag, limb_, sizeof(mag));
  const bool neg = (mag[kLimbs - 1] >> 63) != 0;
  if (neg) {
    unsigned carry = 1;
    for (int i = 0; i < kLimbs; ++i) {
      const unsigned __int128 sum =
          static_cast<unsigned __int128>(~mag[i]) + carry;
      mag[i] = static_cast<std::uint64_t>(sum);
      carry = static_cast<unsigned>(sum >> 64);
    }
  }

  int msb = -1;
  for (int i = kLimbs - 1; i >= 0; --i) {
    if (mag[i] != 0) {
      msb = i * 64 + 63 - std::countl_zero(mag[i]);
      break;
    }
  }
  if (msb < 0) return 0.0f;  // exact zero reduces to +0

  const auto bit_at = [&](int idx) -> unsigned {
    if (idx < 0) return 0;
    return static_cast<unsigned>((mag[idx >> 6] >> (idx & 63)) & 1);
  };
  const auto any_below = [&](int idx) -> bool {
    if (idx <= 0) return false;
    const int limb = idx >> 6;
    const int off = idx & 63;
    if (off && (mag[limb] & ((std::uint64_t{1} << off) - 1))) return true;
    for (int i = 0; i < limb; ++i)
      if (mag[i] != 0) return true;
    return false;
  };
  const auto field = [&](int lo, int hi) -> std::uint64_t {
    // Extract bits [lo, hi], hi - lo < 64.
    std::uint64_t v = 0;
    for (int i = hi; i >= lo; --i) v = (v << 1) | bit_at(i);
    return v;
  };

  const std::uint32_t sign_bits = neg ? 0x80000000u : 0;

  // Normal range when the leading bit is at least 2^-126 (index 172).
  if (msb >= kBias - 126) {
    std::uint64_t mant = field(msb - 23, msb);  // 24 bits incl. leading one
    const unsigned guard = bit_at(msb - 24);
    const bool sticky = any_below(msb - 24);
    int top = msb;
    if (guard && (sticky || (mant & 1))) {
      if (++mant == (std::uint64_t{1} << 24)) {
        mant >>= 1;
        ++top;
      }
    }
    const int exp_field = top - kBias + 127;
    if (exp_field >= 255) {
      return neg ? -std::numeric_limits<float>::infinity()
                 : std::numeric_limits<float>::infinity();
    }
    return std::bit_cast<float>(sign_bits |
                                (static_cast<std::uint32_t>(exp_field) << 23) |
                                static_cast<std::uint32_t>(mant & 0x7FFFFF));
  }

  // Subnormal result: fixed rounding position at 2^-149 (bit 149).
  std::uint64_t mant = field(kBias - 149, msb);
  const unsigned guard = bit_at(kBias - 150);
  const bool sticky = any_below(kBias - 150);
  if (guard && (sticky || (mant & 1))) ++mant;
  if (mant == 0) return neg ? -0.0f : 0.0f;
  // mant == 2^23 promotes to the smallest normal via the exponent field.
  return std::bit_cast<float>(sign_bits | static_cast<std::uint32_t>(mant));
}

}  // namespace ntx
