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
#include "ntxsim/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "ntxsim/ntx.hpp"
#include "ntxsim/special.hpp"

namespace ntx {
namespace {

constexpr std::size_t kTcdmBytes = 128 * 1024;
constexpr std::int64_t kTcdmWords = kTcdmBytes / 4;
constexpr float kNegInf = -std::numeric_limits<float>::infinity();

std::int64_t cdiv(std::int64_t a, std::int64_t b) {
  return (a + b - 1) / b;  // callers guarantee a >= 0, b > 0
}

struct Scratch {
  std::vector<std::byte> mem{kTcdmBytes};

  std::span<std::byte> span() { return {mem.data(), mem.size()}; }
  void write(std::int64_t word, std::span<const float> v) {
    std::memcpy(mem.data() + word * 4, v.data(), v.size() * 4);
  }
  void read(std::int64_t word, std::span<float> v) const {
    std::memcpy(v.data(), mem.data() + word * 4, v.size() * 4);
  }
  void fill(std::int64_t word, std::int64_t n, float v) {
    for (std::int64_t i = 0; i < n; ++i)
      std::memcpy(mem.data() + (word + i) * 4, &v, 4);
  }
};

using Bounds = std::array<std::uint32_t, kMaxLoops>;
using Strides = std::array<std::int64_t, kMaxLoops>;

NtxCommand five_loop(Opcode op, const Bounds& n, int init_store_level,
                     std::int64_t base0, const Strides& s0, std::int64_t base1,
                     const Strides& s1, std::int64_t base2, const Strides& s2,
                     float scalar = 0.0f) {
  NtxCommand cmd;
  cmd.opcode = op;
  cmd.hwl.bounds = n;
  cmd.hwl.outer_level = 4;
  cmd.hwl.init_level = init_store_level;
  cmd.hwl.store_level = init_store_level;
  cmd.scalar = scalar;
  cmd.agu[0] = agu_from_word_strides(base0 * 4, s0, n);
  cmd.agu[1] = agu_from_word_strides(base1 * 4, s1, n);
  cmd.agu[2] = agu_from_word_strides(base2 * 4, s2, n);
  return cmd;
}

// Stage one channel-major tensor into scratch with a zero (or fill) border.
void stage_padded(Scratch& sc, std::int64_t word, std::span<const float> t,
                  int c, int h, int w, int pad, float border) {
  const int hp = h + 2 * pad, wp = w + 2 * pad;
  sc.fill(word, static_cast<std::int64_t>(c) * hp * wp, border);
  for (int ci = 0; ci < c; ++ci)
    for (int row = 0; row < h; ++row)
      sc.write(word + (static_cast<std::int64_t>(ci) * hp + row + pad) * wp + pad,
               t.subspan((static_cast<std::size_t>(ci) * h + row) * w, w));
}

// Chunked elementwise pass: out_i = scalar + a_i (op) b_i. A single-element
// b broadcasts through a stride-0 stream.
std::vector<float> elementwise(Opcode op, std::span<const float> a,
                               std::span<const float> b, float scalar = 0.0f) {
  constexpr int kChunk = 8192;
  Scratch sc;
  std::vector<float> out(a.size());
  const bool bcast = b.size() == 1;
  if (bcast) sc.write(3 * kChunk, b);
  for (std::size_t off = 0; off < a.size(); off += kChunk) {
    const int n = static_cast<int>(std::min<std::size_t>(kChunk, a.size() - off));
    sc.write(0, a.subspan(off, n));
    if (!bcast) sc.write(kChunk, b.subspan(off, n));
    NtxCommand cmd;
    cmd.opcode = op;
    cmd.hwl.bounds[0] = static_cast<std::uint32_t>(n);
    cmd.scalar = scalar;
    cmd.agu[0].base = 0;
    cmd.agu[0].step = {4, 0, 0, 0, 0};
    cmd.agu[1].base = (bcast ? 3 * kChunk : kChunk) * 4;
    cmd.agu[1].step = {bcast ? 0 : 4, 0, 0, 0, 0};
    cmd.agu[2].base = 2 * kChunk * 4;
    cmd.agu[2].step = {4, 0, 0, 0, 0};
    execute_command(cmd, sc.span());
    sc.read(2 * kChunk, std::span<float>(out.data() + off, n));
  }
  return out;
}

std::vector<float> scaled(std::span<const float> a, float k) {
  const float kk[1] = {k};
  return elementwise(Opcode::kVMult, a, {kk, 1});
}

bool all_finite(std::span<const float> v) {
  for (float x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

void ConvGeom::validate() const {
  if (cin < 1 || hin < 1 || win < 1 || cout < 1 || uh < 1 || uw < 1 ||
      stride < 1 || pad < 0)
    throw ConfigError("convolution geometry fields must be positive");
  if (uh > hin + 2 * pad || uw > win + 2 * pad || hout() < 1 || wout() < 1)
    throw ConfigError("kernel does not fit the padded input");
}

void PoolGeom::validate() const {
  if (c < 1 || hin < 1 || win < 1 || kh < 1 || kw < 1 || stride < 1 || pad < 0)
    throw ConfigError("pooling geometry fields must be positive");
  if (kh > hin + 2 * pad || kw > win + 2 * pad || hout() < 1 || wout() < 1)
    throw ConfigError("window does not fit the padded input");
}

std::vector<float> conv_forward(const ConvGeom& g, std::span<const float> x,
                                std::span<const float> w) {
  g.validate();
  const int ho = g.hout(), wo = g.wout();
  const int wp = g.win + 2 * g.pad;
  const std::int64_t wlen = static_cast<std::int64_t>(g.cin) * g.uh * g.uw;

  // Row tiling: a group of r output rows needs a slab of r*s + uh - s padded
  // input rows plus one channel's weights and the output rows.
  const auto need = [&](std::int64_t r) {
    const std::int64_t slab_h = r * g.stride + g.uh - g.stride;
    return static_cast<std::int64_t>(g.cin) * slab_h * wp + wlen + r * wo;
  };
  std::int64_t rows = ho;
  while (rows > 1 && need(rows) > kTcdmWords) --rows;
  if (need(rows) > kTcdmWords)
    throw ConfigError(
        "convolution tile exceeds local memory even at one output row; "
        "split the input channels");

  const std::int64_t slab_h = rows * g.stride + g.uh - g.stride;
  const std::int64_t w_off = static_cast<std::int64_t>(g.cin) * slab_h * wp;
  const std::int64_t y_off = w_off + wlen;

  Scratch sc;
  std::vector<float> y(static_cast<std::size_t>(g.cout) * ho * wo);
  std::vector<float> slab(static_cast<std::size_t>(g.cin) * slab_h * wp);

  for (int r0 = 0; r0 < ho; r0 += static_cast<int>(rows)) {
    const int r = std::min<int>(static_cast<int>(rows), ho - r0);
    // slab row i = padded input row r0*s + i
    std::fill(slab.begin(), slab.end(), 0.0f);
    for (int c = 0; c < g.cin; ++c)
      for (int i = 0; i < r * g.stride + g.uh - g.stride; ++i) {
        const int src = r0 * g.stride + i - g.pad;  // unpadded row index
        if (src < 0 || src >= g.hin) continue;
        for (int col = 0; col < g.win; ++col)
          slab[(static_cast<std::size_t>(c) * slab_h + i) * wp + g.pad + col] =
              x[(static_cast<std::size_t>(c) * g.hin + src) * g.win + col];
      }
    sc.write(0, slab);

    for (int co = 0; co < g.cout; ++co) {
      sc.write(w_off, w.subspan(static_cast<std::size_t>(co) * wlen, wlen));
      const Bounds n = {static_cast<std::uint32_t>(g.cin),
                        static_cast<std::uint32_t>(g.uw),
                        static_cast<std::uint32_t>(g.uh),
                        static_cast<std::uint32_t>(wo),
                        static_cast<std::uint32_t>(r)};
      const auto cmd = five_loop(
          Opcode::kMac, n, 3,
          /*x*/ 0,
          {slab_h * wp, 1, wp, g.stride, static_cast<std::int64_t>(g.stride) * wp},
          /*w*/ w_off, {static_cast<std::int64_t>(g.uh) * g.uw, 1, g.uw, 0, 0},
          /*y*/ y_off, {0, 0, 0, 1, wo});
      execute_command(cmd, sc.span());
      sc.read(y_off, std::span<float>(
                         y.data() + (static_cast<std::size_t>(co) * ho + r0) * wo,
                         static_cast<std::size_t>(r) * wo));
    }
  }
  return y;
}

PhaseDecomposition decompose_strided_backward(int uh, int uw, int stride) {
  if (uh < 1 || uw < 1 || stride < 1)
    throw ConfigError("kernel and stride must be positive");
  PhaseDecomposition d;
  d.stride = stride;
  for (int rh = 0; rh < stride; ++rh)
    for (int rw = 0; rw < stride; ++rw) {
      PhaseDecomposition::Phase p;
      p.rh = rh;
      p.rw = rw;
      p.kh = rh < uh ? static_cast<int>(cdiv(uh - rh, stride)) : 0;
      p.kw = rw < uw ? static_cast<int>(cdiv(uw - rw, stride)) : 0;
      d.phases.push_back(p);
    }
  return d;
}

std::vector<float> conv_backward_data(const ConvGeom& g,
                                      std::span<const float> dy,
                                      std::span<const float> w) {
  g.validate();
  const int ho = g.hout(), wo = g.wout(), s = g.stride;
  const int mkh = static_cast<int>(cdiv(g.uh, s));
  const int mkw = static_cast<int>(cdiv(g.uw, s));
  const int hp = ho + 2 * mkh, wp = wo + 2 * mkw;  // padded gradient plane

  const std::int64_t dy_words = static_cast<std::int64_t>(g.cout) * hp * wp;
  const std::int64_t w_words =
      static_cast<std::int64_t>(g.cout) * g.cin * g.uh * g.uw;
  const std::int64_t plane = static_cast<std::int64_t>(g.hin) * g.win;
  if (dy_words + w_words + plane > kTcdmWords)
    throw ConfigError(
        "backward-data working set exceeds local memory; "
        "split the output channels");
  const std::int64_t w_off = dy_words;
  const std::int64_t dx_off = w_off + w_words;

  Scratch sc;
  sc.fill(0, dy_words, 0.0f);
  for (int co = 0; co < g.cout; ++co)
    for (int row = 0; row < ho; ++row)
      sc.write((static_cast<std::int64_t>(co) * hp + row + mkh) * wp + mkw,
               dy.subspan((static_cast<std::size_t>(co) * ho + row) * wo, wo));
  sc.write(w_off, w);

  const auto decomp = decompose_strided_backward(g.uh, g.uw, s);
  std::vector<float> dx(static_cast<std::size_t>(g.cin) * g.hin * g.win);

  for (int c = 0; c < g.cin; ++c) {
    sc.fill(dx_off, plane, 0.0f);
    for (const auto& ph : decomp.phases) {
      if (ph.kh == 0 || ph.kw == 0) continue;
      // valid output positions i = s*q + r - pad for each axis
      const auto lo = [&](int r) {
        return std::max<std::int64_t>(0, cdiv(g.pad - r, s));
      };
      const std::int64_t qh0 = lo(ph.rh), qw0 = lo(ph.rw);
      const std::int64_t qh1 = (g.hin - 1 + g.pad - ph.rh) / s;
      const std::int64_t qw1 = (g.win - 1 + g.pad - ph.rw) / s;
      if (qh1 < qh0 || qw1 < qw0) continue;
      const Bounds n = {static_cast<std::uint32_t>(g.cout),
                        static_cast<std::uint32_t>(ph.kw),
                        static_cast<std::uint32_t>(ph.kh),
                        static_cast<std::uint32_t>(qw1 - qw0 + 1),
                        static_cast<std::uint32_t>(qh1 - qh0 + 1)};
      const auto cmd = five_loop(
          Opcode::kMac, n, 3,
          /*dy*/ (mkh + qh0) * wp + (mkw + qw0),
          {static_cast<std::int64_t>(hp) * wp, -1, -wp, 1, wp},
          /*w*/ w_off + (static_cast<std::int64_t>(c) * g.uh + ph.rh) * g.uw +
              ph.rw,
          {static_cast<std::int64_t>(g.cin) * g.uh * g.uw, s,
           static_cast<std::int64_t>(s) * g.uw, 0, 0},
          /*dx*/ dx_off + (s * qh0 + ph.rh - g.pad) * g.win +
              (s * qw0 + ph.rw - g.pad),
          {0, 0, 0, s, static_cast<std::int64_t>(s) * g.win});
      execute_command(cmd, sc.span());
    }
    sc.read(dx_off, std::span<float>(dx.data() + static_cast<std::size_t>(c) * plane,
                                     plane));
  }
  return dx;
}

std::vector<float> conv_backward_weight(const ConvGeom& g,
                                        std::span<const float> x,
                                        std::span<const float> dy) {
  g.validate();
  const int ho = g.hout(), wo = g.wout(), s = g.stride;
  const int hp = g.hin + 2 * g.pad, wp = g.win + 2 * g.pad;
  const std::int64_t x_words = static_cast<std::int64_t>(g.cin) * hp * wp;
  const std::int64_t dy_words = static_cast<std::int64_t>(g.cout) * ho * wo;
  const std::int64_t dw_words =
      static_cast<std::int64_t>(g.cout) * g.cin * g.uh * g.uw;
  if (x_words + dy_words + dw_words > kTcdmWords)
    throw ConfigError(
        "backward-weight working set exceeds local memory; "
        "split the batch or channels");
  const std::int64_t dy_off = x_words, dw_off = x_words + dy_words;

  Scratch sc;
  stage_padded(sc, 0, x, g.cin, g.hin, g.win, g.pad, 0.0f);
  sc.write(dy_off, dy);

  std::vector<float> dw(static_cast<std::size_t>(dw_words));
  for (int co = 0; co < g.cout; ++co) {
    const Bounds n = {static_cast<std::uint32_t>(wo),
                      static_cast<std::uint32_t>(ho),
                      static_cast<std::uint32_t>(g.uw),
                      static_cast<std::uint32_t>(g.uh),
                      static_cast<std::uint32_t>(g.cin)};
    const auto cmd = five_loop(
        Opcode::kMac, n, 2,
        /*dy*/ dy_off + static_cast<std::int64_t>(co) * ho * wo,
        {1, wo, 0, 0, 0},
        /*x*/ 0,
        {s, static_cast<std::int64_t>(s) * wp, 1, wp,
         static_cast<std::int64_t>(hp) * wp},
        /*dw*/ dw_off + static_cast<std::int64_t>(co) * g.cin * g.uh * g.uw,
        {0, 0, 1, g.uw, static_cast<std::int64_t>(g.uh) * g.uw});
    execute_command(cmd, sc.span());
  }
  sc.read(dw_off, dw);
  return dw;
}

MaxPoolResult maxpool_forward(const PoolGeom& g, std::span<const float> x) {
  g.validate();
  const int ho = g.hout(), wo = g.wout(), s = g.stride;
  const int hp = g.hin + 2 * g.pad, wp = g.win + 2 * g.pad;
  const std::int64_t in_plane = static_cast<std::int64_t>(hp) * wp;
  const std::int64_t out_plane = static_cast<std::int64_t>(ho) * wo;

  // process channels in groups that fit beside two output planes per channel
  std::int64_t cc = g.c;
  while (cc > 1 && cc * (in_plane + 2 * out_plane) > kTcdmWords) --cc;
  if (cc * (in_plane + 2 * out_plane) > kTcdmWords)
    throw ConfigError("pooling plane exceeds local memory");
  const std::int64_t y_off = cc * in_plane;
  const std::int64_t i_off = y_off + cc * out_plane;

  MaxPoolResult res;
  res.y.resize(static_cast<std::size_t>(g.c) * out_plane);
  res.argmax.resize(res.y.size());

  Scratch sc;
  for (int c0 = 0; c0 < g.c; c0 += static_cast<int>(cc)) {
    const int nch = std::min<int>(static_cast<int>(cc), g.c - c0);
    stage_padded(sc, 0, x.subspan(static_cast<std::size_t>(c0) * g.hin * g.win,
                                  static_cast<std::size_t>(nch) * g.hin * g.win),
                 nch, g.hin, g.win, g.pad, kNegInf);
    const Bounds n = {static_cast<std::uint32_t>(g.kw),
                      static_cast<std::uint32_t>(g.kh),
                      static_cast<std::uint32_t>(wo),
                      static_cast<std::uint32_t>(ho),
                      static_cast<std::uint32_t>(nch)};
    const Strides sx = {1, wp, s, static_cast<std::int64_t>(s) * wp, in_plane};
    const Strides so = {0, 0, 1, wo, out_plane};
    auto cmd = five_loop(Opcode::kMax, n, 2, 0, sx, 0, sx, y_off, so, kNegInf);
    execute_command(cmd, sc.span());
    cmd.opcode = Opcode::kArgMax;
    cmd.agu[2].base = i_off * 4;
    execute_command(cmd, sc.span());

    sc.read(y_off, std::span<float>(res.y.data() + static_cast<std::size_t>(c0) * out_plane,
                                    static_cast<std::size_t>(nch) * out_plane));
    std::memcpy(res.argmax.data() + static_cast<std::size_t>(c0) * out_plane,
                sc.mem.data() + i_off * 4,
                static_cast<std::size_t>(nch) * out_plane * 4);
  }
  return res;
}

std::vector<float> maxpool_backward(const PoolGeom& g,
                                    std::span<const float> dy,
                                    std::span<const std::uint32_t> argmax) {
  g.validate();
  const int ho = g.hout(), wo = g.wout(), s = g.stride;
  const int hp = g.hin + 2 * g.pad, wp = g.win + 2 * g.pad;
  if (dy.size() != argmax.size() ||
      dy.size() != static_cast<std::size_t>(g.c) * ho * wo)
    throw ConfigError("gradient and index shapes must match the pool output");

  // The controller core walks the recorded winners and scatters additively.
  std::vector<float> pad_dx(static_cast<std::size_t>(g.c) * hp * wp, 0.0f);
  for (int c = 0; c < g.c; ++c)
    for (int oh = 0; oh < ho; ++oh)
      for (int ow = 0; ow < wo; ++ow) {
        const std::size_t o = (static_cast<std::size_t>(c) * ho + oh) * wo + ow;
        const std::uint32_t idx = argmax[o];
        if (idx >= static_cast<std::uint32_t>(g.kh * g.kw))
          throw AddressFault(idx, {static_cast<std::uint32_t>(ow),
                                   static_cast<std::uint32_t>(oh),
                                   static_cast<std::uint32_t>(c), 0, 0});
        const int ph = oh * s + static_cast<int>(idx) / g.kw;
        const int pw = ow * s + static_cast<int>(idx) % g.kw;
        pad_dx[(static_cast<std::size_t>(c) * hp + ph) * wp + pw] += dy[o];
      }

  std::vector<float> dx(static_cast<std::size_t>(g.c) * g.hin * g.win);
  for (int c = 0; c < g.c; ++c)
    for (int row = 0; row < g.hin; ++row)
      for (int col = 0; col < g.win; ++col)
        dx[(static_cast<std::size_t>(c) * g.hin + row) * g.win + col] =
            pad_dx[(static_cast<std::size_t>(c) * hp + row + g.pad) * wp +
                   col + g.pad];
  return dx;
}

std::vector<float> avgpool_forward(const PoolGeom& g, std::span<const float> x) {
  g.validate();
  const int ho = g.hout(), wo = g.wout(), s = g.stride;
  const int hp = g.hin + 2 * g.pad, wp = g.win + 2 * g.pad;
  const std::int64_t in_plane = static_cast<std::int64_t>(hp) * wp;
  const std::int64_t out_plane = static_cast<std::int64_t>(ho) * wo;

  std::int64_t cc = g.c;
  while (cc > 1 && cc * (in_plane + out_plane) + 1 > kTcdmWords) --cc;
  if (cc * (in_plane + out_plane) + 1 > kTcdmWords)
    throw ConfigError("pooling plane exceeds local memory");
  const std::int64_t y_off = cc * in_plane;
  const std::int64_t k_off = y_off + cc * out_plane;  // 1/window constant

  std::vector<float> y(static_cast<std::size_t>(g.c) * out_plane);
  Scratch sc;
  const float inv[1] = {1.0f / static_cast<float>(g.kh * g.kw)};
  for (int c0 = 0; c0 < g.c; c0 += static_cast<int>(cc)) {
    const int nch = std::min<int>(static_cast<int>(cc), g.c - c0);
    stage_padded(sc, 0, x.subspan(static_cast<std::size_t>(c0) * g.hin * g.win,
                                  static_cast<std::size_t>(nch) * g.hin * g.win),
                 nch, g.hin, g.win, g.pad, 0.0f);
    sc.write(k_off, inv);
    const Bounds n = {static_cast<std::uint32_t>(g.kw),
                      static_cast<std::uint32_t>(g.kh),
                      static_cast<std::uint32_t>(wo),
                      static_cast<std::uint32_t>(ho),
                      static_cast<std::uint32_t>(nch)};
    const auto cmd = five_loop(
        Opcode::kMac, n, 2, 0,
        {1, wp, s, static_cast<std::int64_t>(s) * wp, in_plane}, k_off,
        {0, 0, 0, 0, 0}, y_off, {0, 0, 1, wo, out_plane});
    execute_command(cmd, sc.span());
    sc.read(y_off, std::span<float>(y.data() + static_cast<std::size_t>(c0) * out_plane,
                                    static_cast<std::size_t>(nch) * out_plane));
  }
  return y;
}

std::vector<float> avgpool_backward(const PoolGeom& g,
                                    std::span<const float> dy) {
  g.validate();
  const int ho = g.hout(), wo = g.wout(), s = g.stride;
  const int hp = g.hin + 2 * g.pad, wp = g.win + 2 * g.pad;
  const float inv = 1.0f / static_cast<float>(g.kh * g.kw);

  std::vector<float> pad_dx(static_cast<std::size_t>(g.c) * hp * wp, 0.0f);
  for (int c = 0; c < g.c; ++c)
    for (int oh = 0; oh < ho; ++oh)
      for (int ow = 0; ow < wo; ++ow) {
        const float v =
            dy[(static_cast<std::size_t>(c) * ho + oh) * wo + ow] * inv;
        for (int i = 0; i < g.kh; ++i)
          for (int j = 0; j < g.kw; ++j)
            pad_dx[(static_cast<std::size_t>(c) * hp + oh * s + i) * wp +
                   ow * s + j] += v;
      }

  std::vector<float> dx(static_cast<std::size_t>(g.c) * g.hin * g.win);
  for (int c = 0; c < g.c; ++c)
    for (int row = 0; row < g.hin; ++row)
      for (int col = 0; col < g.win; ++col)
        dx[(static_cast<std::size_t>(c) * g.hin + row) * g.win + col] =
            pad_dx[(static_cast<std::size_t>(c) * hp + row + g.pad) * wp +
                   col + g.pad];
  return dx;
}

std::vector<float> relu_forward(std::span<const float> x) {
  return elementwise(Opcode::kRelu, x, x, 0.0f);
}

std::vector<float> relu_backward(std::span<const float> x,
                                 std::span<const float> dy) {
  if (x.size() != dy.size())
    throw ConfigError("activation and gradient sizes must match");
  return elementwise(Opcode::kThreshMask, x, dy, 0.0f);
}

std::vector<float> softmax(std::span<const float> x) {
  if (x.empty()) return {};
  constexpr int kChunk = 8192;
  Scratch sc;
  const float one[1] = {1.0f};

  float mx = kNegInf;
  for (std::size_t off = 0; off < x.size(); off += kChunk) {
    const int n = static_cast<int>(std::min<std::size_t>(kChunk, x.size() - off));
    sc.write(0, x.subspan(off, n));
    NtxCommand cmd;
    cmd.opcode = Opcode::kMax;
    cmd.hwl.bounds = {static_cast<std::uint32_t>(n), 1, 1, 1, 1};
    cmd.hwl.outer_level = 1;
    cmd.hwl.init_level = 1;
    cmd.hwl.store_level = 1;
    cmd.scalar = mx;  // carries the running maximum across chunks
    cmd.agu[0].step = {4, 0, 0, 0, 0};
    cmd.agu[2].base = kChunk * 4;
    execute_command(cmd, sc.span());
    sc.read(kChunk, {&mx, 1});
  }

  const float neg[1] = {-mx};
  auto shifted = elementwise(Opcode::kVAdd, x, {neg, 1});
  auto ex = special_function(SpecialFn::kExp, shifted).values;

  float total = 0.0f;
  sc.write(2 * kChunk, {one, 1});
  for (std::size_t off = 0; off < ex.size(); off += kChunk) {
    const int n = static_cast<int>(std::min<std::size_t>(kChunk, ex.size() - off));
    sc.write(0, std::span<const float>(ex.data() + off, n));
    NtxCommand cmd;
    cmd.opcode = Opcode::kMac;
    cmd.hwl.bounds = {static_cast<std::uint32_t>(n), 1, 1, 1, 1};
    cmd.hwl.outer_level = 1;
    cmd.hwl.init_level = 1;
    cmd.hwl.store_level = 1;
    cmd.scalar = total;
    cmd.agu[0].step = {4, 0, 0, 0, 0};
    cmd.agu[1].base = 2 * kChunk * 4;
    cmd.agu[2].base = kChunk * 4;
    execute_command(cmd, sc.span());
    sc.read(kChunk, {&total, 1});
  }

  std::vector<float> denom(ex.size(), total);
  return special_function(SpecialFn::kDiv, ex, denom).values;
}

void OptimizerState::resize(std::size_t n) {
  theta.assign(n, 0.0f);
  velocity.assign(n, 0.0f);
  sq_accum.assign(n, 0.0f);
  moment1.assign(n, 0.0f);
  moment2.assign(n, 0.0f);
}

bool optimizer_step(OptKind kind, OptimizerState& st, std::span<const float> g) {
  if (g.size() != st.theta.size())
    throw ConfigError("gradient shape does not match the parameters");
  if (!all_finite(g)) return false;

  switch (kind) {
    case OptKind::kSgd: {
      const auto upd = scaled(g, -st.lr);
      st.theta = elementwise(Opcode::kVAdd, st.theta, upd);
      break;
    }
    case OptKind::kMomentum: {
      const auto decayed = scaled(st.velocity, st.alpha);
      const auto upd = scaled(g, -st.lr);
      st.velocity = elementwise(Opcode::kVAdd, decayed, upd);
      st.theta = elementwise(Opcode::kVAdd, st.theta, st.velocity);
      break;
    }
    case OptKind::kRmsProp: {
      const auto keep = scaled(st.sq_accum, st.rho);
      const auto g2 = elementwise(Opcode::kVMult, g, g);
      const auto add = scaled(g2, 1.0f - st.rho);
      st.sq_accum = elementwise(Opcode::kVAdd, keep, add);
      const float one[1] = {1.0f};
      const auto guarded =
          elementwise(Opcode::kVMult, st.sq_accum, {one, 1}, st.delta);
      const auto inv_root = special_function(SpecialFn::kRsqrt, guarded).values;
      const auto scaled_g = elementwise(Opcode::kVMult, g, inv_root);
      const auto upd = scaled(scaled_g, -st.lr);
      st.theta = elementwise(Opcode::kVAdd, st.theta, upd);
      break;
    }
    case OptKind::kAdam: {
      ++st.step;
      const auto m_keep = scaled(st.moment1, st.beta1);
      const auto m_add = scaled(g, 1.0f - st.beta1);
      st.moment1 = elementwise(Opcode::kVAdd, m_keep, m_add);
      const auto v_keep = scaled(st.moment2, st.beta2);
      const auto g2 = elementwise(Opcode::kVMult, g, g);
      const auto v_add = scaled(g2, 1.0f - st.beta2);
      st.moment2 = elementwise(Opcode::kVAdd, v_keep, v_add);

      const float bc1 = static_cast<float>(
          1.0 / (1.0 - std::pow(double(st.beta1), double(st.step))));
      const float bc2 = static_cast<float>(
          1.0 / (1.0 - std::pow(double(st.beta2), double(st.step))));
      const auto mhat = scaled(st.moment1, bc1);
      const auto vhat = scaled(st.moment2, bc2);
      const auto root = special_function(SpecialFn::kSqrt, vhat).values;
      const float one[1] = {1.0f};
      const auto den = elementwise(Opcode::kVMult, root, {one, 1}, st.delta);
      const auto quot = special_function(SpecialFn::kDiv, mhat, den).values;
      const auto upd = scaled(quot, -st.lr);
      st.theta = elementwise(Opcode::kVAdd, st.theta, upd);
      break;
    }
  }
  return true;
}

}  // namespace ntx
