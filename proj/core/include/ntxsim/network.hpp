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
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace ntx {

// Networks are flat layer lists loaded from JSON description files. Branch
// structures (inception modules, residual blocks) are pre-flattened: every
// layer declares its own input shape, so grouped convolutions and branch
// fan-ins stay self-describing without a dataflow graph. All values are
// float32; 1 MB below means 10^6 bytes.

struct NetworkError : std::runtime_error {
  explicit NetworkError(const std::string& what) : std::runtime_error(what) {}
};

enum class LayerKind {
  kConv,
  kLinear,
  kMaxPool,
  kAvgPool,
  kRelu,
  kLrn,  // also covers batchnorm (same cost shape: stats pass + scale pass)
  kSoftmax,
  kConcat,
  kAdd,      // residual fan-in
  kLstmCell  // fused gate block; expands to 8 matrix ops + pointwise update
};

// Canonical lowercase name, e.g. for reports.
const char* kind_name(LayerKind k);

struct Shape {
  int c = 1, h = 1, w = 1;

  std::int64_t elems() const {
    return static_cast<std::int64_t>(c) * h * w;
  }
  bool operator==(const Shape&) const = default;
};

struct LayerSpec {
  LayerKind kind = LayerKind::kConv;
  std::string name;
  Shape in, out;
  int kh = 0, kw = 0;  // conv / pool window
  int stride = 1;
  int pad_h = 0, pad_w = 0;
  std::int64_t params = 0;  // weight + bias value count
  bool store = true;        // output kept for the backward pass
  bool store_idx = false;   // max-pool winner indices kept as well
  int batch = 1;            // weight-reuse batch for matrix workloads
  int repeat = 1;           // this layer appears `repeat` times in sequence
};

struct NetworkSpec {
  std::string name;
  Shape input;
  std::vector<LayerSpec> layers;
};

// Structural validation: positive geometry, per-kind input/output shape
// consistency (pools may round up or down), parameter counts matching the
// declared window with or without biases, repetition >= 1, and the first
// layer consuming the declared network input. Throws NetworkError.
void validate(const NetworkSpec& n);

NetworkSpec parse_network(const std::string& json_text);
NetworkSpec load_network(const std::filesystem::path& file);

enum class Pass { kInference, kForward, kBackward };

// Op and byte accounting for one instance of a layer and one image.
// `macs` are multiply-accumulates; `other_ops` are single-slot ops
// (comparisons, adds, pointwise math) that occupy one datapath cycle each
// and count as one FLOP. Byte volumes split into what must land in the
// scratchpad before compute starts (head), what streams concurrently with
// compute (par), and what drains afterwards (tail). Repetition counts are
// applied by the network-level aggregators, not here.
struct LayerWorkload {
  std::int64_t macs = 0;
  std::int64_t other_ops = 0;
  double d_head = 0.0;
  double d_par = 0.0;
  double d_tail = 0.0;
  std::int64_t param_bytes = 0;
  std::int64_t act_bytes = 0;  // stored output (+ winner indices)

  std::int64_t n_c() const { return macs + other_ops; }  // datapath cycles
  std::int64_t flops() const { return 2 * macs + other_ops; }
  double d_dma() const { return d_head + d_par + d_tail; }
};

// kForward == kInference numerically (training differs only in what gets
// stored); kBackward covers backward-data plus backward-weight.
LayerWorkload layer_workload(const LayerSpec& l, Pass pass);

enum class Regime { kInference, kTrainBs1, kTrainBsN };

struct Footprint {
  std::int64_t param_bytes = 0;
  std::int64_t act_bytes = 0;
  std::int64_t total_bytes = 0;

  double param_mb() const { return param_bytes / 1e6; }
  double act_mb() const { return act_bytes / 1e6; }
  double total_mb() const { return total_bytes / 1e6; }
};

// Inference keeps only the largest live tensor; training keeps every stored
// activation of the whole step; batched training additionally holds one
// parameter-sized gradient accumulator.
Footprint network_memory_footprint(const NetworkSpec& n, Regime r);

struct OpCounts {
  std::int64_t macs = 0;
  std::int64_t other = 0;

  std::int64_t cycles() const { return macs + other; }
  std::int64_t flops() const { return 2 * macs + other; }
};

// Per-image totals across all layers and repetitions.
OpCounts inference_ops(const NetworkSpec& n);
OpCounts training_step_ops(const NetworkSpec& n);

}  // namespace ntx
