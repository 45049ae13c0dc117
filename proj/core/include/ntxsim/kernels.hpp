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

// Training primitives lowered to command sequences and executed on the
// functional co-processor model. Tensors are flat row-major float arrays in
// channel-major (CHW) order; weights are [c_out][c_in][u_h][u_w]. A linear
// layer is the 1x1-input special case of a convolution and needs no
// dedicated lowering.

struct ConvGeom {
  int cin = 1, hin = 1, win = 1;
  int cout = 1, uh = 1, uw = 1;
  int stride = 1, pad = 0;

  int hout() const { return (hin + 2 * pad - uh) / stride + 1; }
  int wout() const { return (win + 2 * pad - uw) / stride + 1; }
  void validate() const;
};

// y[cout][hout][wout]; one command per output channel and row tile, five
// loops covering the full 2-D output slice times the 3-D reduction.
std::vector<float> conv_forward(const ConvGeom& g, std::span<const float> x,
                                std::span<const float> w);

// dx = dy (*) flipped weights with channels transposed; strides > 1 run as
// the dense phase decomposition below, never by materializing zero-stuffed
// gradients.
std::vector<float> conv_backward_data(const ConvGeom& g,
                                      std::span<const float> dy,
                                      std::span<const float> w);

// dw[cout][cin][uh][uw] = x (*) dy, the small-output correlation.
std::vector<float> conv_backward_weight(const ConvGeom& g,
                                        std::span<const float> x,
                                        std::span<const float> dy);

// A strided backward convolution splits into stride^2 dense phases. Phase
// (rh, rw) owns the output positions congruent to (rh, rw) mod stride and
// convolves with the sub-kernel tap (jh, jw) -> weight (stride*jh + rh,
// stride*jw + rw).
struct PhaseDecomposition {
  struct Phase {
    int rh = 0, rw = 0;  // output interleave offsets
    int kh = 0, kw = 0;  // dense sub-kernel extent (may be 0: empty phase)
  };
  int stride = 1;
  std::vector<Phase> phases;
};
PhaseDecomposition decompose_strided_backward(int uh, int uw, int stride);

struct PoolGeom {
  int c = 1, hin = 1, win = 1;
  int kh = 1, kw = 1;
  int stride = 1, pad = 0;

  int hout() const { return (hin + 2 * pad - kh) / stride + 1; }
  int wout() const { return (win + 2 * pad - kw) / stride + 1; }
  void validate() const;
};

// Forward max pooling records the flat in-window index of each winner
// (first occurrence on ties) for the backward scatter.
struct MaxPoolResult {
  std::vector<float> y;
  std::vector<std::uint32_t> argmax;
};
MaxPoolResult maxpool_forward(const PoolGeom& g, std::span<const float> x);

// Scatter each gradient to its recorded winner, summing on collisions.
std::vector<float> maxpool_backward(const PoolGeom& g,
                                    std::span<const float> dy,
                                    std::span<const std::uint32_t> argmax);

std::vector<float> avgpool_forward(const PoolGeom& g, std::span<const float> x);
std::vector<float> avgpool_backward(const PoolGeom& g,
                                    std::span<const float> dy);

std::vector<float> relu_forward(std::span<const float> x);
// dx_i = dy_i where x_i > 0, else 0 (zero subgradient at the kink).
std::vector<float> relu_backward(std::span<const float> x,
                                 std::span<const float> dy);

// Numerically stable: shifts by the maximum before exponentiation.
std::vector<float> softmax(std::span<const float> x);

enum class OptKind { kSgd, kMomentum, kRmsProp, kAdam };

struct OptimizerState {
  std::vector<float> theta;
  std::vector<float> velocity;  // momentum
  std::vector<float> sq_accum;  // rmsprop
  std::vector<float> moment1;   // adam
  std::vector<float> moment2;   // adam
  std::uint64_t step = 0;       // adam bias correction

  float lr = 0.01f;       // epsilon in the update rules
  float alpha = 0.9f;     // momentum decay
  float rho = 0.9f;       // rmsprop decay
  float delta = 1e-6f;    // denominator guard
  float beta1 = 0.9f;     // adam first-moment decay
  float beta2 = 0.999f;   // adam second-moment decay

  void resize(std::size_t n);
};

// Applies one update in place. A non-finite gradient skips the whole update
// and returns false.
bool optimizer_step(OptKind kind, OptimizerState& st, std::span<const float> g);

}  // namespace ntx
