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
#include "verify.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>
#include <span>

#include "ntxsim/accumulator.hpp"
#include "ntxsim/kernels.hpp"

namespace ntx::verify {
namespace {

using Rng = std::mt19937_64;

// Neumaier-compensated double sum: the independent accumulation route for
// small tensors, exact to far below half a float32 ulp at these sizes.
struct Dsum {
  double s = 0.0, c = 0.0;
  void add(double p) {
    const double t = s + p;
    c += std::abs(s) >= std::abs(p) ? (s - t) + p : (p - t) + s;
    s = t;
  }
  double value() const { return s + c; }
};

std::vector<float> rand_vec(Rng& rng, std::size_t n, float scale = 2.0f) {
  std::uniform_real_distribution<float> d(-scale, scale);
  std::vector<float> v(n);
  for (float& x : v) x = d(rng);
  return v;
}

// Output extent is drawn first so the floor in hout() is always exact.
ConvGeom rand_geom(Rng& rng) {
  std::uniform_int_distribution<int> ch(1, 5), ker(1, 3), st(1, 2), out(2, 5);
  ConvGeom g;
  g.cin = ch(rng);
  g.cout = ch(rng);
  g.uh = ker(rng);
  g.uw = ker(rng);
  g.stride = st(rng);
  const int pmax = std::min(g.uh - 1, g.uw - 1) / 2;
  g.pad = std::uniform_int_distribution<int>(0, pmax)(rng);
  g.hin = (out(rng) - 1) * g.stride + g.uh - 2 * g.pad;
  g.win = (out(rng) - 1) * g.stride + g.uw - 2 * g.pad;
  return g;
}

std::size_t xi(const ConvGeom& g, int c, int h, int w) {
  return (std::size_t(c) * g.hin + h) * g.win + w;
}
std::size_t wi(const ConvGeom& g, int co, int ci, int jh, int jw) {
  return ((std::size_t(co) * g.cin + ci) * g.uh + jh) * g.uw + jw;
}

std::vector<float> oracle_conv_forward(const ConvGeom& g,
                                       std::span<const float> x,
                                       std::span<const float> w) {
  const int ho = g.hout(), wo = g.wout();
  std::vector<float> y(std::size_t(g.cout) * ho * wo);
  std::size_t o = 0;
  for (int co = 0; co < g.cout; ++co)
    for (int oh = 0; oh < ho; ++oh)
      for (int ow = 0; ow < wo; ++ow, ++o) {
        Dsum s;
        for (int ci = 0; ci < g.cin; ++ci)
          for (int jh = 0; jh < g.uh; ++jh)
            for (int jw = 0; jw < g.uw; ++jw) {
              const int ih = oh * g.stride + jh - g.pad;
              const int iw = ow * g.stride + jw - g.pad;
              if (ih < 0 || ih >= g.hin || iw < 0 || iw >= g.win) continue;
              s.add(double(x[xi(g, ci, ih, iw)]) *
                    double(w[wi(g, co, ci, jh, jw)]));
            }
        y[o] = float(s.value());
      }
  return y;
}

std::vector<float> oracle_conv_backward_data(const ConvGeom& g,
                                             std::span<const float> dy,
                                             std::span<const float> w) {
  const int ho = g.hout(), wo = g.wout();
  std::vector<float> dx(std::size_t(g.cin) * g.hin * g.win);
  std::size_t o = 0;
  for (int ci = 0; ci < g.cin; ++ci)
    for (int ih = 0; ih < g.hin; ++ih)
      for (int iw = 0; iw < g.win; ++iw, ++o) {
        Dsum s;
        for (int co = 0; co < g.cout; ++co)
          for (int jh = 0; jh < g.uh; ++jh)
            for (int jw = 0; jw < g.uw; ++jw) {
              const int nh = ih + g.pad - jh;
              const int nw = iw + g.pad - jw;
              if (nh < 0 || nw < 0 || nh % g.stride || nw % g.stride) continue;
              const int oh = nh / g.stride, ow = nw / g.stride;
              if (oh >= ho || ow >= wo) continue;
              s.add(double(dy[(std::size_t(co) * ho + oh) * wo + ow]) *
                    double(w[wi(g, co, ci, jh, jw)]));
            }
        dx[o] = float(s.value());
      }
  return dx;
}

std::vector<float> oracle_conv_backward_weight(const ConvGeom& g,
                                               std::span<const float> x,
                                               std::span<const float> dy) {
  const int ho = g.hout(), wo = g.wout();
  std::vector<float> dw(std::size_t(g.cout) * g.cin * g.uh * g.uw);
  for (int co = 0; co < g.cout; ++co)
    for (int ci = 0; ci < g.cin; ++ci)
      for (int jh = 0; jh < g.uh; ++jh)
        for (int jw = 0; jw < g.uw; ++jw) {
          Dsum s;
          for (int oh = 0; oh < ho; ++oh)
            for (int ow = 0; ow < wo; ++ow) {
              const int ih = oh * g.stride + jh - g.pad;
              const int iw = ow * g.stride + jw - g.pad;
              if (ih < 0 || ih >= g.hin || iw < 0 || iw >= g.win) continue;
              s.add(double(x[xi(g, ci, ih, iw)]) *
                    double(dy[(std::size_t(co) * ho + oh) * wo + ow]));
            }
          dw[wi(g, co, ci, jh, jw)] = float(s.value());
        }
  return dw;
}

bool same_bits(float a, float b) {
  if (std::isnan(a) && std::isnan(b)) return true;
  if (a == 0.0f && b == 0.0f) return true;  // signed zeros compare equal
  return std::bit_cast<std::uint32_t>(a) == std::bit_cast<std::uint32_t>(b);
}

bool all_bits(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!same_bits(a[i], b[i])) return false;
  return true;
}

bool all_close(std::span<const float> a, std::span<const float> b,
               double rel) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(double(a[i])),
                                   std::abs(double(b[i])), 1.0});
    if (std::abs(double(a[i]) - double(b[i])) > rel * denom) return false;
  }
  return true;
}

struct Check {
  SuiteResult& r;
  void operator()(bool ok, const char* property) {
    ++r.total;
    if (ok)
      ++r.passed;
    else if (r.first_failure.empty())
      r.first_failure = property;
  }
};

SuiteResult suite_oracle(Rng& rng, int cases, bool fault) {
  SuiteResult r{"oracle-equivalence"};
  Check check{r};
  for (int i = 0; i < cases; ++i) {
    const int kind = i % 7;
    if (kind <= 2) {
      const ConvGeom g = rand_geom(rng);
      const auto x = rand_vec(rng, std::size_t(g.cin) * g.hin * g.win);
      const auto w = rand_vec(rng, std::size_t(g.cout) * g.cin * g.uh * g.uw);
      const auto dy =
          rand_vec(rng, std::size_t(g.cout) * g.hout() * g.wout());
      std::vector<float> got, want;
      const char* property;
      if (kind == 0) {
        got = conv_forward(g, x, w);
        want = oracle_conv_forward(g, x, w);
        property = "conv-forward-bitexact";
      } else if (kind == 1) {
        got = conv_backward_data(g, dy, w);
        want = oracle_conv_backward_data(g, dy, w);
        property = "conv-backward-data-bitexact";
      } else {
        got = conv_backward_weight(g, x, dy);
        want = oracle_conv_backward_weight(g, x, dy);
        property = "conv-backward-weight-bitexact";
      }
      if (fault && i == 0) want[0] = std::nextafter(want[0], 1e9f);
      check(all_bits(got, want), property);
    } else if (kind == 3) {
      PoolGeom p;
      p.c = 1 + int(rng() % 4);
      p.kh = 2 + int(rng() % 2);
      p.kw = p.kh;
      p.stride = 1 + int(rng() % 2);
      p.hin = (3 + int(rng() % 3) - 1) * p.stride + p.kh;
      p.win = (3 + int(rng() % 3) - 1) * p.stride + p.kw;
      const auto x = rand_vec(rng, std::size_t(p.c) * p.hin * p.win);
      const auto dy =
          rand_vec(rng, std::size_t(p.c) * p.hout() * p.wout());
      const MaxPoolResult got = maxpool_forward(p, x);
      // Index-based oracle: first maximum in row-major window order.
      bool ok = true;
      std::vector<float> dx(x.size(), 0.0f);
      std::size_t o = 0;
      for (int c = 0; c < p.c && ok; ++c)
        for (int oh = 0; oh < p.hout() && ok; ++oh)
          for (int ow = 0; ow < p.wout(); ++ow, ++o) {
            float best = -std::numeric_limits<float>::infinity();
            std::uint32_t arg = 0;
            for (int jh = 0; jh < p.kh; ++jh)
              for (int jw = 0; jw < p.kw; ++jw) {
                const int ih = oh * p.stride + jh, iw = ow * p.stride + jw;
                const float v = x[(std::size_t(c) * p.hin + ih) * p.win + iw];
                if (v > best) {
                  best = v;
                  arg = std::uint32_t(jh * p.kw + jw);
                }
              }
            const int ih = oh * p.stride + int(arg) / p.kw;
            const int iw = ow * p.stride + int(arg) % p.kw;
            dx[(std::size_t(c) * p.hin + ih) * p.win + iw] += dy[o];
            if (!same_bits(got.y[o], best) || got.argmax[o] != arg) {
              ok = false;
              break;
            }
          }
      check(ok, "maxpool-forward-argmax");
      check(all_bits(maxpool_backward(p, dy, got.argmax), dx),
            "maxpool-backward-scatter");
    } else if (kind == 4) {
      PoolGeom p;
      p.c = 1 + int(rng() % 4);
      p.kh = p.kw = 2 + int(rng() % 2);
      p.stride = p.kh;
      p.hin = p.stride * (2 + int(rng() % 3));
      p.win = p.stride * (2 + int(rng() % 3));
      const auto x = rand_vec(rng, std::size_t(p.c) * p.hin * p.win);
      const auto dy =
          rand_vec(rng, std::size_t(p.c) * p.hout() * p.wout());
      std::vector<float> y(dy.size());
      std::size_t o = 0;
      for (int c = 0; c < p.c; ++c)
        for (int oh = 0; oh < p.hout(); ++oh)
          for (int ow = 0; ow < p.wout(); ++ow, ++o) {
            Dsum s;
            for (int jh = 0; jh < p.kh; ++jh)
              for (int jw = 0; jw < p.kw; ++jw)
                s.add(x[(std::size_t(c) * p.hin + oh * p.stride + jh) * p.win +
                        ow * p.stride + jw]);
            y[o] = float(s.value() / (p.kh * p.kw));
          }
      check(all_close(avgpool_forward(p, x), y, 1e-6),
            "avgpool-forward-mean");
      const auto dx = avgpool_backward(p, dy);
      Dsum in, out;
      for (float v : dx) in.add(v);
      for (float v : dy) out.add(v);
      check(std::abs(in.value() - out.value()) <=
                1e-5 * std::max(1.0, std::abs(out.value())),
            "avgpool-backward-mass");
    } else if (kind == 5) {
      const auto x = rand_vec(rng, 64);
      const auto dy = rand_vec(rng, 64);
      const auto y = relu_forward(x);
      const auto dx = relu_backward(x, dy);
      bool ok = true;
      for (std::size_t j = 0; j < x.size(); ++j) {
        ok = ok && same_bits(y[j], x[j] > 0.0f ? x[j] : 0.0f);
        ok = ok && same_bits(dx[j], x[j] > 0.0f ? dy[j] : 0.0f);
      }
      check(ok, "relu-gating");
    } else {
      const std::size_t n = 16;
      OptimizerState st;
      st.resize(n);
      auto th = rand_vec(rng, n);
      st.theta = th;
      const auto grad = rand_vec(rng, n);
      const OptKind ok_kind = OptKind(int(rng() % 4));
      // A few warm-up steps so the state terms are nontrivial.
      for (int s = 0; s < 3; ++s) optimizer_step(ok_kind, st, grad);
      OptimizerState ref = st;
      bool ok = optimizer_step(ok_kind, st, grad);
      // Double-precision replay of the published update rules.
      bool match = ok;
      for (std::size_t j = 0; j < n && match; ++j) {
        const double g = grad[j], lr = st.lr;
        double want = ref.theta[j];
        switch (ok_kind) {
          case OptKind::kSgd:
            want -= lr * g;
            break;
          case OptKind::kMomentum: {
            const double v = double(st.alpha) * ref.velocity[j] - lr * g;
            want += v;
            break;
          }
          case OptKind::kRmsProp: {
            const double r =
                double(st.rho) * ref.sq_accum[j] + (1.0 - st.rho) * g * g;
            want -= lr * g / (std::sqrt(r) + double(st.delta));
            break;
          }
          case OptKind::kAdam: {
            const double m1 =
                double(st.beta1) * ref.moment1[j] + (1.0 - st.beta1) * g;
            const double m2 =
                double(st.beta2) * ref.moment2[j] + (1.0 - st.beta2) * g * g;
            const double t = double(ref.step) + 1.0;
            const double c1 = m1 / (1.0 - std::pow(double(st.beta1), t));
            const double c2 = m2 / (1.0 - std::pow(double(st.beta2), t));
            want -= lr * c1 / (std::sqrt(c2) + double(st.delta));
            break;
          }
        }
        const double got = st.theta[j];
        match = std::abs(got - want) <= 1e-4 * std::max(1.0, std::abs(want));
      }
      check(match, "optimizer-update-rule");
      auto bad = grad;
      bad[3] = std::numeric_limits<float>::quiet_NaN();
      const auto before = st.theta;
      check(!optimizer_step(ok_kind, st, bad) && st.theta == before,
            "optimizer-nonfinite-skip");
    }
  }
  return r;
}

SuiteResult suite_gradient(Rng& rng, int cases, bool fault) {
  SuiteResult r{"gradient"};
  Check check{r};
  for (int i = 0; i < cases; ++i) {
    const ConvGeom g = rand_geom(rng);
    const auto x = rand_vec(rng, std::size_t(g.cin) * g.hin * g.win);
    const auto w = rand_vec(rng, std::size_t(g.cout) * g.cin * g.uh * g.uw);
    const auto proj =
        rand_vec(rng, std::size_t(g.cout) * g.hout() * g.wout());
    // L = <conv(x, w), proj>; dL/dx and dL/dw come from the backward
    // kernels, the finite difference runs through the double-path oracle.
    const auto dx = conv_backward_data(g, proj, w);
    const auto dw = conv_backward_weight(g, x, proj);
    auto loss = [&](std::span<const float> xv, std::span<const float> wv) {
      const auto y = oracle_conv_forward(g, xv, wv);
      Dsum s;
      for (std::size_t j = 0; j < y.size(); ++j)
        s.add(double(y[j]) * double(proj[j]));
      return s.value();
    };
    auto agrees = [&](std::vector<float> v, std::size_t j, bool is_x,
                      double analytic) {
      const float h = std::max(1e-2f, 1e-2f * std::abs(v[j]));
      const float orig = v[j];
      v[j] = orig + h;
      const double lp = is_x ? loss(v, w) : loss(x, v);
      v[j] = orig - h;
      const double lm = is_x ? loss(v, w) : loss(x, v);
      const double fd = (lp - lm) / (2.0 * double(h));
      return std::abs(fd - analytic) /
                 std::max({std::abs(fd), std::abs(analytic), 1.0}) <=
             1e-3;
    };
    bool case_ok = true;
    const double bias = fault && i == 0 ? 1e3 : 0.0;
    for (int k = 0; k < 4 && case_ok; ++k) {
      const std::size_t jx = rng() % x.size();
      case_ok = agrees(x, jx, true, double(dx[jx]) + bias);
    }
    for (int k = 0; k < 4 && case_ok; ++k) {
      const std::size_t jw = rng() % w.size();
      case_ok = agrees(w, jw, false, double(dw[jw]) + bias);
    }
    check(case_ok, "conv-finite-difference");
  }
  return r;
}

SuiteResult suite_decomposition(Rng& rng, bool fault) {
  SuiteResult r{"decomposition"};
  Check check{r};
  for (int u = 1; u <= 5; ++u) {
    for (int stride = 1; stride <= 4; ++stride) {
      const int ph = (u - 1) / 2;  // probe zero and half padding, once each
      for (int pad = 0; pad <= ph; pad += std::max(1, ph)) {
        ConvGeom g;
        g.cin = 2;
        g.cout = 3;
        g.uh = g.uw = u;
        g.stride = stride;
        g.pad = pad;
        g.hin = 2 * stride + u - 2 * pad;
        g.win = 3 * stride + u - 2 * pad;
        auto dy =
            rand_vec(rng, std::size_t(g.cout) * g.hout() * g.wout());
        const auto w =
            rand_vec(rng, std::size_t(g.cout) * g.cin * g.uh * g.uw);
        const auto got = conv_backward_data(g, dy, w);

        // Zero-stuffing oracle: spread dy on the stride grid and run the
        // dense transposed convolution through the same engine path.
        const int hs = (g.hout() - 1) * stride + 1;
        const int ws = (g.wout() - 1) * stride + 1;
        std::vector<float> stuffed(std::size_t(g.cout) * hs * ws, 0.0f);
        for (int co = 0; co < g.cout; ++co)
          for (int oh = 0; oh < g.hout(); ++oh)
            for (int ow = 0; ow < g.wout(); ++ow)
              stuffed[(std::size_t(co) * hs + oh * stride) * ws +
                      ow * stride] =
                  dy[(std::size_t(co) * g.hout() + oh) * g.wout() + ow];
        std::vector<float> flipped(w.size());
        for (int co = 0; co < g.cout; ++co)
          for (int ci = 0; ci < g.cin; ++ci)
            for (int jh = 0; jh < u; ++jh)
              for (int jw = 0; jw < u; ++jw)
                flipped[((std::size_t(ci) * g.cout + co) * u + jh) * u + jw] =
                    w[wi(g, co, ci, u - 1 - jh, u - 1 - jw)];
        ConvGeom t;
        t.cin = g.cout;
        t.hin = hs;
        t.win = ws;
        t.cout = g.cin;
        t.uh = t.uw = u;
        t.stride = 1;
        t.pad = u - 1 - pad;
        auto want = conv_forward(t, stuffed, flipped);
        if (fault && u == 3 && stride == 2 && pad == 0 && !want.empty())
          want[0] = std::nextafter(want[0], 1e9f);
        check(all_bits(got, want), "strided-backward-zero-stuffing");
      }
    }
  }
  return r;
}

SuiteResult suite_accumulator(Rng& rng, bool fault) {
  SuiteResult r{"accumulator"};
  Check check{r};
  std::uniform_real_distribution<float> mant(-1.0f, 1.0f);
  std::uniform_int_distribution<int> expo(-40, 40);

  for (int round = 0; round < 10; ++round) {
    std::vector<float> v(48);
    for (float& x : v) x = std::ldexp(mant(rng), expo(rng));
    WideAccumulator base;
    for (float x : v) base.add(x);
    const float ref = base.reduce();
    for (int s = 0; s < 4; ++s) {
      std::shuffle(v.begin(), v.end(), rng);
      WideAccumulator acc;
      for (float x : v) acc.add(x);
      check(same_bits(acc.reduce(), ref), "sum-order-invariance");
    }
  }

  for (int round = 0; round < 8; ++round) {
    const float tail = mant(rng);
    std::vector<float> v;
    for (int i = 0; i < 16; ++i) {
      const float x = std::ldexp(mant(rng), expo(rng));
      v.push_back(x);
      v.push_back(-x);
    }
    std::shuffle(v.begin(), v.end(), rng);
    WideAccumulator acc;
    for (float x : v) acc.add(x);
    acc.add(tail);
    check(same_bits(acc.reduce(), tail), "exact-cancellation");
  }

  std::uniform_int_distribution<long long> ints(-(1 << 20), 1 << 20);
  for (int round = 0; round < 8; ++round) {
    WideAccumulator acc;
    long long total = 0;
    for (int i = 0; i < 200; ++i) {
      const long long k = ints(rng);
      total += k;
      acc.add(std::ldexp(float(k), -10));
    }
    const float want = float(std::ldexp(double(total), -10));
    check(same_bits(acc.reduce(), fault && round == 0
                                      ? std::nextafter(want, 1e9f)
                                      : want),
          "integer-sum-single-rounding");
  }

  std::uniform_int_distribution<long long> small(-4096, 4096);
  for (int round = 0; round < 8; ++round) {
    WideAccumulator acc;
    long long total = 0;
    for (int i = 0; i < 100; ++i) {
      const long long p = small(rng), q = small(rng);
      total += p * q;
      acc.fmac(std::ldexp(float(p), -6), std::ldexp(float(q), -6));
    }
    check(same_bits(acc.reduce(), float(std::ldexp(double(total), -12))),
          "product-sum-single-rounding");
  }

  {
    WideAccumulator acc;
    acc.add(1.0f);
    acc.add(std::numeric_limits<float>::quiet_NaN());
    acc.add(2.0f);
    check(std::isnan(acc.reduce()) && acc.invalid(), "nan-poisons-sum");
    WideAccumulator inf;
    inf.add(std::numeric_limits<float>::infinity());
    inf.add(-1e30f);
    check(inf.reduce() == std::numeric_limits<float>::infinity() &&
              !inf.invalid(),
          "infinity-dominates");
    inf.add(-std::numeric_limits<float>::infinity());
    check(std::isnan(inf.reduce()) && inf.invalid(),
          "opposite-infinities-invalid");
    WideAccumulator z;
    z.fmac(std::numeric_limits<float>::infinity(), 0.0f);
    check(std::isnan(z.reduce()) && z.invalid(), "inf-times-zero-invalid");
  }
  return r;
}

}  // namespace

std::vector<SuiteResult> run_all(std::uint64_t seed, int cases,
                                 const std::string& inject_fault) {
  std::vector<SuiteResult> out;
  {
    Rng rng(seed);
    out.push_back(
        suite_oracle(rng, std::max(7, cases), inject_fault == "oracle"));
  }
  {
    Rng rng(seed + 1);
    out.push_back(suite_gradient(rng, std::max(4, cases / 5),
                                 inject_fault == "gradient"));
  }
  {
    Rng rng(seed + 2);
    out.push_back(suite_decomposition(rng, inject_fault == "decomposition"));
  }
  {
    Rng rng(seed + 3);
    out.push_back(suite_accumulator(rng, inject_fault == "accumulator"));
  }
  return out;
}

}  // namespace ntx::verify
