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

#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

using boost::multiprecision::cpp_int;
using ntx::WideAccumulator;

namespace {

// Independent reference: exact big-integer sum on a 2^-600 grid, then one
// correctly rounded conversion through strtof on the exact decimal string.
struct ExactSum {
  cpp_int v;
  bool nan = false, pinf = false, ninf = false;

  static long long scaled_mantissa(float x, int* e2) {
    int e;
    const float m = std::frexp(x, &e);  // x = m * 2^e, |m| in [0.5, 1)
    *e2 = e - 24;
    return std::llround(std::ldexp(m, 24));  // exact, < 2^24 in magnitude
  }

  void add(float x) {
    if (std::isnan(x)) {
      nan = true;
    } else if (std::isinf(x)) {
      (x > 0 ? pinf : ninf) = true;
    } else if (x != 0.0f) {
      int e;
      const long long m = scaled_mantissa(x, &e);
      v += cpp_int(m) << (e + 600);
    }
  }

  void fmac(float a, float b) {
    if (std::isnan(a) || std::isnan(b)) {
      nan = true;
      return;
    }
    if (std::isinf(a) || std::isinf(b)) {
      if (a == 0.0f || b == 0.0f) {
        nan = true;
      } else {
        ((std::signbit(a) != std::signbit(b)) ? ninf : pinf) = true;
      }
      return;
    }
    if (a == 0.0f || b == 0.0f) return;
    int ea, eb;
    const long long ma = scaled_mantissa(a, &ea);
    const long long mb = scaled_mantissa(b, &eb);
    v += cpp_int(ma) * mb << (ea + eb + 600);
  }

  float round() const {
    if (nan || (pinf && ninf)) return std::numeric_limits<float>::quiet_NaN();
    if (pinf) return std::numeric_limits<float>::infinity();
    if (ninf) return -std::numeric_limits<float>::infinity();
    if (v == 0) return 0.0f;
    static const cpp_int pow5 = boost::multiprecision::pow(cpp_int(5), 600);
    const std::string s = cpp_int(v * pow5).str() + "e-600";
    return std::strtof(s.c_str(), nullptr);
  }
};

std::uint32_t bits_of(float x) { return std::bit_cast<std::uint32_t>(x); }

bool same_float(float a, float b) {
  if (std::isnan(a) && std::isnan(b)) return true;
  return bits_of(a) == bits_of(b);
}

float random_float(std::mt19937& rng, int emin, int emax) {
  std::uniform_int_distribution<int> de(emin, emax);
  std::uniform_int_distribution<std::uint32_t> dm(0, 0x7FFFFF);
  std::uniform_int_distribution<int> ds(0, 1);
  const std::uint32_t w = (static_cast<std::uint32_t>(ds(rng)) << 31) |
                          (static_cast<std::uint32_t>(de(rng)) << 23) | dm(rng);
  return std::bit_cast<float>(w);
}

}  // namespace

TEST_CASE("large cancellation keeps the small term") {
  WideAccumulator acc;
  acc.fmac(1e20f, 1.0f);
  acc.add(1.0f);
  acc.fmac(-1e20f, 1.0f);
  CHECK(acc.reduce() == 1.0f);
  CHECK(!acc.invalid());
}

TEST_CASE("exact zero reduces to +0") {
  WideAccumulator acc;
  acc.add(1.5f);
  acc.add(-1.5f);
  const float r = acc.reduce();
  CHECK(r == 0.0f);
  CHECK(!std::signbit(r));
}

TEST_CASE("tiny negative residue keeps its sign when rounded to zero") {
  const float dmin = std::numeric_limits<float>::denorm_min();
  WideAccumulator acc;
  acc.add(-dmin);
  acc.fmac(dmin, 0.5f);  // sum is -2^-150, a tie that rounds to even zero
  const float r = acc.reduce();
  CHECK(r == 0.0f);
  CHECK(std::signbit(r));
}

TEST_CASE("round to nearest even at the float32 boundary") {
  WideAccumulator acc;
  acc.add(1.0f);
  acc.fmac(std::ldexp(1.0f, -24), 1.0f);
  CHECK(acc.reduce() == 1.0f);  // exact tie rounds down to even

  acc.clear();
  acc.add(1.0f);
  acc.add(std::ldexp(1.0f, -24));
  acc.add(std::ldexp(1.0f, -40));
  CHECK(acc.reduce() == 1.0f + std::ldexp(1.0f, -23));
}

TEST_CASE("subnormal ties round to even") {
  const float dmin = std::numeric_limits<float>::denorm_min();
  WideAccumulator acc;
  acc.fmac(dmin, 0.5f);  // 2^-150 alone is below half an ulp of zero... a tie
  CHECK(acc.reduce() == 0.0f);

  acc.clear();
  acc.fmac(dmin, 0.5f);
  acc.fmac(dmin, std::ldexp(1.0f, -20));
  CHECK(acc.reduce() == dmin);  // sticky bit breaks the tie upward

  acc.clear();
  acc.fmac(dmin, 1.5f);  // 3 * 2^-150 ties between 1 and 2 ulp, even wins
  CHECK(acc.reduce() == 2 * dmin);
}

TEST_CASE("overflow saturates to infinity") {
  const float big = std::numeric_limits<float>::max();
  WideAccumulator acc;
  acc.add(big);
  acc.add(big);
  CHECK(acc.reduce() == std::numeric_limits<float>::infinity());
  CHECK(!acc.invalid());

  acc.clear();
  acc.add(-big);
  acc.fmac(-big, 0.75f);
  CHECK(acc.reduce() == -std::numeric_limits<float>::infinity());
}

TEST_CASE("nan and opposite infinities poison the sum") {
  WideAccumulator acc;
  acc.add(std::numeric_limits<float>::quiet_NaN());
  CHECK(acc.invalid());
  CHECK(std::isnan(acc.reduce()));

  acc.clear();
  acc.add(std::numeric_limits<float>::infinity());
  acc.add(-std::numeric_limits<float>::infinity());
  CHECK(acc.invalid());
  CHECK(std::isnan(acc.reduce()));

  acc.clear();
  acc.fmac(0.0f, std::numeric_limits<float>::infinity());
  CHECK(acc.invalid());

  acc.clear();
  acc.fmac(-2.0f, std::numeric_limits<float>::infinity());
  CHECK(!acc.invalid());
  CHECK(acc.reduce() == -std::numeric_limits<float>::infinity());
}

TEST_CASE("reduction is invariant under permutation") {
  std::mt19937 rng(12345);
  std::vector<std::pair<float, float>> terms;
  for (int i = 0; i < 200; ++i)
    terms.emplace_back(random_float(rng, 0, 254), random_float(rng, 0, 254));

  auto run = [&]() {
    WideAccumulator acc;
    for (const auto& [a, b] : terms) acc.fmac(a, b);
    return bits_of(acc.reduce());
  };
  const std::uint32_t ref = run();
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(terms.begin(), terms.end(), rng);
    CHECK(run() == ref);
  }
}

TEST_CASE("random fmac sequences match the exact big-integer reference") {
  std::mt19937 rng(987654);
  std::uniform_int_distribution<int> dlen(1, 60);
  for (int seq = 0; seq < 400; ++seq) {
    WideAccumulator acc;
    ExactSum ref;
    const int n = dlen(rng);
    for (int i = 0; i < n; ++i) {
      const float a = random_float(rng, 0, 254);
      const float b = random_float(rng, 0, 254);
      acc.fmac(a, b);
      ref.fmac(a, b);
    }
    CAPTURE(seq);
    CHECK(same_float(acc.reduce(), ref.round()));
  }
}

TEST_CASE("random plain sums match the exact big-integer reference") {
  std::mt19937 rng(424242);
  std::uniform_int_distribution<int> dlen(1, 80);
  for (int seq = 0; seq < 400; ++seq) {
    WideAccumulator acc;
    ExactSum ref;
    const int n = dlen(rng);
    for (int i = 0; i < n; ++i) {
      const float x = random_float(rng, 0, 254);
      acc.add(x);
      ref.add(x);
    }
    CAPTURE(seq);
    CHECK(same_float(acc.reduce(), ref.round()));
  }
}

TEST_CASE("subnormal-heavy products match the exact reference") {
  std::mt19937 rng(55555);
  for (int seq = 0; seq < 300; ++seq) {
    WideAccumulator acc;
    ExactSum ref;
    for (int i = 0; i < 20; ++i) {
      // Exponent fields near zero land the products deep in the subnormals.
      const float a = random_float(rng, 0, 70);
      const float b = random_float(rng, 0, 70);
      acc.fmac(a, b);
      ref.fmac(a, b);
    }
    CAPTURE(seq);
    CHECK(same_float(acc.reduce(), ref.round()));
  }
}

TEST_CASE("near-overflow sums match the exact reference") {
  std::mt19937 rng(777);
  for (int seq = 0; seq < 200; ++seq) {
    WideAccumulator acc;
    ExactSum ref;
    for (int i = 0; i < 12; ++i) {
      const float a = random_float(rng, 200, 254);
      const float b = random_float(rng, 200, 254);
      acc.fmac(a, b);
      ref.fmac(a, b);
    }
    CAPTURE(seq);
    CHECK(same_float(acc.reduce(), ref.round()));
  }
}
