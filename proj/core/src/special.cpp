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
#include "ntxsim/special.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <limits>

#include "ntxsim/ntx.hpp"

namespace ntx {
namespace {

constexpr float kNan = std::numeric_limits<float>::quiet_NaN();
constexpr float kInf = std::numeric_limits<float>::infinity();

// Driver cost of programming one command (one cycle per staging register:
// 5 bounds + 3 levels + opcode + scalar + 3 x (base + 5 steps)).
constexpr std::uint64_t kIssueCycles = 28;

// Core software cost per element for the scalar steps around the passes.
constexpr std::uint64_t kSeedCycles = 12;   // table lookup + exponent math
constexpr std::uint64_t kClampCycles = 6;   // range clamp for exp
constexpr std::uint64_t kFixupCycles = 8;   // exponent reinsertion / split

constexpr int kChunk = 2048;

// 8-bit reciprocal seed tables, built once from the interval midpoints.
struct SeedTables {
  std::array<float, 256> recip;   // ~1/m for m in [0.5, 1)
  std::array<float, 256> rsqrt;   // ~1/sqrt(m) for m in [0.25, 1)
  SeedTables() {
    for (int i = 0; i < 256; ++i) {
      recip[i] = static_cast<float>(1.0 / (0.5 + (i + 0.5) / 512.0));
      rsqrt[i] = static_cast<float>(1.0 / std::sqrt(0.25 + (i + 0.5) * 0.75 / 256.0));
    }
  }
};
const SeedTables kSeed;

// e^r on [-0.35, 0.35], degree-6 Chebyshev fit (max error ~2^-25.5).
constexpr std::array<float, 7> kExpPoly = {
    1.0f,          1.0f,           0.5f,          0.16666404902935028f,
    0.041666340082883835f, 0.008375958539545536f, 0.0013942148070782423f};

constexpr float kLn2Hi = 0.693359375f;        // 0.693147... with 12 zero tail bits
constexpr float kLn2Lo = -2.12194440e-4f;     // ln2 - kLn2Hi
constexpr float kInvLn2 = 1.44269504f;
constexpr float kLn2 = 0.693147182f;
constexpr float kMagic = 12582912.0f;         // 1.5 * 2^23 rounds to integer

// Scratch memory shared by the passes of one chunk.
class Pipeline {
 public:
  Pipeline() : mem_(128 * 1024) {}

  // Named word arrays; slot 0 holds the constant pool.
  std::int64_t slot(int i) const { return 1024 + i * (kChunk * 4); }
  std::int64_t constant(int i) const { return i * 4; }

  void set_const(int i, float v) { std::memcpy(mem_.data() + constant(i), &v, 4); }
  void write(std::int64_t addr, std::span<const float> v) {
    std::memcpy(mem_.data() + addr, v.data(), v.size() * 4);
  }
  void read(std::int64_t addr, std::span<float> v) {
    std::memcpy(v.data(), mem_.data() + addr, v.size() * 4);
  }

  // One elementwise pass over n words: out = scalar + stream(a0) op stream(a1).
  // A negative address selects the stride-0 constant at that pool index.
  void pass(Opcode op, int n, std::int64_t a0, std::int64_t a1,
            std::int64_t out, float scalar = 0.0f) {
    NtxCommand cmd;
    cmd.opcode = op;
    cmd.hwl.bounds[0] = static_cast<std::uint32_t>(n);
    auto stream = [&](std::int64_t addr) {
      AguConfig agu;
      if (addr < 0) {
        agu.base = constant(static_cast<int>(-addr - 1));
        agu.step = {0, 0, 0, 0, 0};
      } else {
        agu.base = addr;
        agu.step = {4, 0, 0, 0, 0};
      }
      return agu;
    };
    cmd.agu[0] = stream(a0);
    cmd.agu[1] = stream(a1);
    cmd.agu[2] = stream(out);
    cmd.scalar = scalar;
    const ExecStats st = execute_command(cmd, {mem_.data(), mem_.size()});
    cycles += kIssueCycles + st.busy_cycles;
  }

  std::uint64_t cycles = 0;

 private:
  std::vector<std::byte> mem_;
};

constexpr std::int64_t C(int i) { return -(i + 1); }  // constant-pool handle

struct Special {
  bool active = false;
  float value = 0.0f;
};

float seed_recip(float b) {
  int e;
  const float m = std::frexp(std::fabs(b), &e);  // m in [0.5, 1)
  const int idx = std::min(255, static_cast<int>((m - 0.5f) * 512.0f));
  return std::copysign(std::ldexp(kSeed.recip[idx], -e), b);
}

float seed_rsqrt(float b) {
  int e;
  float m = std::frexp(b, &e);  // b = m * 2^e
  if (e & 1) {
    m *= 0.5f;
    ++e;
  }
  // now m in [0.25, 1), e even
  const int idx = std::min(255, static_cast<int>((m - 0.25f) * (256.0f / 0.75f)));
  return std::ldexp(kSeed.rsqrt[idx], -e / 2);
}

SpecialResult run_div(std::span<const float> a, std::span<const float> b) {
  SpecialResult res;
  res.values.resize(a.size());
  Pipeline pl;
  pl.set_const(0, -1.0f);
  const std::int64_t A = pl.slot(0), B = pl.slot(1), R = pl.slot(2),
                     T = pl.slot(3), U = pl.slot(4), Q = pl.slot(5);
  std::vector<float> seeds(kChunk);
  std::vector<Special> sp(kChunk);

  for (std::size_t off = 0; off < a.size(); off += kChunk) {
    const int n = static_cast<int>(std::min<std::size_t>(kChunk, a.size() - off));
    pl.cycles += static_cast<std::uint64_t>(kSeedCycles) * n;
    for (int i = 0; i < n; ++i) {
      const float num = a[off + i], den = b[off + i];
      sp[i].active = true;
      if (std::isnan(num) || std::isnan(den)) {
        sp[i].value = kNan;
      } else if (den == 0.0f) {
        if (num == 0.0f) {
          sp[i].value = kNan;
          res.domain_violation = true;
        } else {
          sp[i].value = std::copysign(kInf, num) * std::copysign(1.0f, den);
        }
      } else if (std::isinf(den)) {
        sp[i].value = std::isinf(num)
                          ? (res.domain_violation = true, kNan)
                          : std::copysign(0.0f, num) * std::copysign(1.0f, den);
      } else if (std::fabs(den) < 0x1p-126f || std::fabs(den) >= 0x1p126f) {
        // Outside the iteration's safe exponent range: software fallback.
        sp[i].value = num / den;
      } else {
        sp[i].active = false;
        seeds[i] = seed_recip(den);
      }
    }
    pl.write(A, {a.data() + off, static_cast<std::size_t>(n)});
    pl.write(B, {b.data() + off, static_cast<std::size_t>(n)});
    pl.write(R, {seeds.data(), static_cast<std::size_t>(n)});
    for (int it = 0; it < 3; ++it) {
      pl.pass(Opcode::kVMult, n, B, R, T);             // t = b * r
      pl.pass(Opcode::kVMult, n, T, C(0), U, 2.0f);    // u = 2 - t
      pl.pass(Opcode::kVMult, n, R, U, R);             // r = r * u
    }
    pl.pass(Opcode::kVMult, n, A, R, Q);               // q = a * r
    pl.read(Q, {res.values.data() + off, static_cast<std::size_t>(n)});
    for (int i = 0; i < n; ++i)
      if (sp[i].active) res.values[off + i] = sp[i].value;
  }
  res.cycles = pl.cycles;
  return res;
}

SpecialResult run_root(std::span<const float> a, bool reciprocal) {
  SpecialResult res;
  res.values.resize(a.size());
  Pipeline pl;
  pl.set_const(0, -0.5f);
  const std::int64_t B = pl.slot(0), R = pl.slot(1), T = pl.slot(2),
                     U = pl.slot(3), V = pl.slot(4), Q = pl.slot(5);
  std::vector<float> seeds(kChunk);
  std::vector<Special> sp(kChunk);

  for (std::size_t off = 0; off < a.size(); off += kChunk) {
    const int n = static_cast<int>(std::min<std::size_t>(kChunk, a.size() - off));
    pl.cycles += static_cast<std::uint64_t>(kSeedCycles) * n;
    for (int i = 0; i < n; ++i) {
      const float x = a[off + i];
      sp[i].active = true;
      if (std::isnan(x)) {
        sp[i].value = kNan;
      } else if (x < 0.0f) {
        sp[i].value = kNan;
        res.domain_violation = true;
      } else if (x == 0.0f) {
        sp[i].value = reciprocal ? kInf : x;  // sqrt keeps the zero's sign
      } else if (std::isinf(x)) {
        sp[i].value = reciprocal ? 0.0f : kInf;
      } else if (x < 0x1p-126f || x >= 0x1p126f) {
        sp[i].value = reciprocal ? static_cast<float>(1.0 / std::sqrt(double(x)))
                                 : static_cast<float>(std::sqrt(double(x)));
      } else {
        sp[i].active = false;
        seeds[i] = seed_rsqrt(x);
      }
    }
    pl.write(B, {a.data() + off, static_cast<std::size_t>(n)});
    pl.write(R, {seeds.data(), static_cast<std::size_t>(n)});
    for (int it = 0; it < 3; ++it) {
      pl.pass(Opcode::kVMult, n, R, R, T);            // t = r^2
      pl.pass(Opcode::kVMult, n, T, B, U);            // u = t * b
      pl.pass(Opcode::kVMult, n, U, C(0), V, 1.5f);   // v = 1.5 - u/2
      pl.pass(Opcode::kVMult, n, R, V, R);            // r = r * v
    }
    const std::int64_t result = reciprocal ? R : Q;
    if (!reciprocal) pl.pass(Opcode::kVMult, n, B, R, Q);  // sqrt = b * rsqrt
    pl.read(result, {res.values.data() + off, static_cast<std::size_t>(n)});
    for (int i = 0; i < n; ++i)
      if (sp[i].active) res.values[off + i] = sp[i].value;
  }
  res.cycles = pl.cycles;
  return res;
}

SpecialResult run_exp(std::span<const float> a) {
  SpecialResult res;
  res.values.resize(a.size());
  Pipeline pl;
  pl.set_const(0, 1.0f);
  pl.set_const(1, kInvLn2);
  pl.set_const(2, -kLn2Hi);
  pl.set_const(3, -kLn2Lo);
  pl.set_const(4, kExpPoly[6]);
  const std::int64_t X = pl.slot(0), T = pl.slot(1), K = pl.slot(2),
                     R1 = pl.slot(3), R = pl.slot(4), P = pl.slot(5);
  std::vector<float> clamped(kChunk);

  for (std::size_t off = 0; off < a.size(); off += kChunk) {
    const int n = static_cast<int>(std::min<std::size_t>(kChunk, a.size() - off));
    pl.cycles += static_cast<std::uint64_t>(kClampCycles) * n;
    for (int i = 0; i < n; ++i) {
      float x = a[off + i];
      if (x > 89.5f) x = 89.5f;     // anything larger overflows anyway
      if (x < -104.0f) x = -104.0f; // anything smaller underflows to zero
      clamped[i] = x;               // NaN passes through both compares
    }
    pl.write(X, {clamped.data(), static_cast<std::size_t>(n)});

    pl.pass(Opcode::kVMult, n, X, C(1), T);                // t = x / ln2
    pl.pass(Opcode::kVMult, n, T, C(0), K, kMagic);        // shift into int grid
    pl.pass(Opcode::kVMult, n, K, C(0), K, -kMagic);       // k = round(t)
    pl.pass(Opcode::kVMult, n, K, C(2), T);                // t = -k * ln2hi
    pl.pass(Opcode::kVAdd, n, X, T, R1);                   // r1 = x - k*ln2hi
    pl.pass(Opcode::kVMult, n, K, C(3), T);                // t = -k * ln2lo
    pl.pass(Opcode::kVAdd, n, R1, T, R);                   // r = reduced arg
    pl.pass(Opcode::kVMult, n, R, C(4), P, kExpPoly[5]);   // Horner seed
    for (int d = 4; d >= 0; --d)
      pl.pass(Opcode::kVMult, n, P, R, P, kExpPoly[d]);

    pl.read(P, {clamped.data(), static_cast<std::size_t>(n)});
    std::vector<float> kf(n);
    pl.read(K, {kf.data(), static_cast<std::size_t>(n)});
    pl.cycles += static_cast<std::uint64_t>(kFixupCycles) * n;
    for (int i = 0; i < n; ++i) {
      // Core reinserts the 2^k scale into the exponent field.
      res.values[off + i] = std::isnan(kf[i])
                                ? kNan
                                : std::ldexp(clamped[i],
                                             static_cast<int>(std::lrint(kf[i])));
    }
  }
  res.cycles = pl.cycles;
  return res;
}

SpecialResult run_log(std::span<const float> a) {
  SpecialResult res;
  res.values.resize(a.size());
  Pipeline pl;
  pl.set_const(0, 1.0f);
  pl.set_const(1, -1.0f);
  pl.set_const(2, 2.0f / 7.0f);
  pl.set_const(3, kLn2);
  const std::int64_t M = pl.slot(0), KF = pl.slot(1), NUM = pl.slot(2),
                     DEN = pl.slot(3), R = pl.slot(4), Z = pl.slot(5),
                     S = pl.slot(6), P = pl.slot(7), T = pl.slot(8);
  std::vector<float> ms(kChunk), ks(kChunk), seeds(kChunk);
  std::vector<Special> sp(kChunk);

  for (std::size_t off = 0; off < a.size(); off += kChunk) {
    const int n = static_cast<int>(std::min<std::size_t>(kChunk, a.size() - off));
    pl.cycles += static_cast<std::uint64_t>(kFixupCycles + kSeedCycles) * n;
    for (int i = 0; i < n; ++i) {
      const float x = a[off + i];
      sp[i].active = true;
      ms[i] = 1.0f;
      ks[i] = 0.0f;
      if (std::isnan(x)) {
        sp[i].value = kNan;
      } else if (x <= 0.0f) {
        sp[i].value = kNan;
        res.domain_violation = true;
      } else if (std::isinf(x)) {
        sp[i].value = kInf;
      } else {
        sp[i].active = false;
        int e;
        float m = std::frexp(x, &e);  // m in [0.5, 1)
        if (m < 0.70710678f) {
          m *= 2.0f;
          --e;
        }
        ms[i] = m;  // in [sqrt(1/2), sqrt(2))
        ks[i] = static_cast<float>(e);
        seeds[i] = seed_recip(m + 1.0f);
      }
    }
    pl.write(M, {ms.data(), static_cast<std::size_t>(n)});
    pl.write(KF, {ks.data(), static_cast<std::size_t>(n)});
    pl.write(R, {seeds.data(), static_cast<std::size_t>(n)});

    pl.pass(Opcode::kVMult, n, M, C(0), NUM, -1.0f);  // num = m - 1
    pl.pass(Opcode::kVMult, n, M, C(0), DEN, 1.0f);   // den = m + 1
    for (int it = 0; it < 3; ++it) {
      pl.pass(Opcode::kVMult, n, DEN, R, T);
      pl.pass(Opcode::kVMult, n, T, C(1), S, 2.0f);
      pl.pass(Opcode::kVMult, n, R, S, R);
    }
    pl.pass(Opcode::kVMult, n, NUM, R, Z);            // z = (m-1)/(m+1)
    pl.pass(Opcode::kVMult, n, Z, Z, S);              // s = z^2
    pl.pass(Opcode::kVMult, n, S, C(2), P, 0.4f);     // 2/5 + s*(2/7)
    pl.pass(Opcode::kVMult, n, P, S, P, 2.0f / 3.0f);
    pl.pass(Opcode::kVMult, n, P, S, P, 2.0f);        // 2*atanh(z)/z
    pl.pass(Opcode::kVMult, n, Z, P, T);              // ln(m)
    pl.pass(Opcode::kVMult, n, KF, C(3), P);          // k * ln2
    pl.pass(Opcode::kVAdd, n, T, P, Z);               // ln(x)
    pl.read(Z, {res.values.data() + off, static_cast<std::size_t>(n)});
    for (int i = 0; i < n; ++i)
      if (sp[i].active) res.values[off + i] = sp[i].value;
  }
  res.cycles = pl.cycles;
  return res;
}

}  // namespace

SpecialResult special_function(SpecialFn fn, std::span<const float> a,
                               std::span<const float> b) {
  switch (fn) {
    case SpecialFn::kDiv:
      if (b.size() != a.size())
        throw ConfigError("div needs a denominator batch of equal length");
      return run_div(a, b);
    case SpecialFn::kSqrt:
      return run_root(a, false);
    case SpecialFn::kRsqrt:
      return run_root(a, true);
    case SpecialFn::kExp:
      return run_exp(a);
    case SpecialFn::kLog:
      return run_log(a);
  }
  throw ConfigError("unknown special function");
}

}  // namespace ntx
