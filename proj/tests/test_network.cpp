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
#include "ntxsim/network.hpp"

#include <cmath>
#include <random>
#include <string>

#include <doctest.h>

using namespace ntx;

namespace {

NetworkSpec load(const char* name) {
  return load_network(std::string(NTXSIM_CONFIG_DIR "/networks/") + name +
                      ".json");
}

LayerSpec make_conv(int cin, int hin, int win, int cout, int kh, int kw,
                    int stride, int pad, bool bias = true) {
  LayerSpec l;
  l.kind = LayerKind::kConv;
  l.name = "conv";
  l.in = {cin, hin, win};
  l.out = {cout, (hin + 2 * pad - kh) / stride + 1,
           (win + 2 * pad - kw) / stride + 1};
  l.kh = kh;
  l.kw = kw;
  l.stride = stride;
  l.pad_h = l.pad_w = pad;
  l.params = std::int64_t(kh) * kw * cin * cout + (bias ? cout : 0);
  return l;
}

// Byte totals over a whole network, one image.
struct DmaTotals {
  double inference = 0.0, training = 0.0;
};

DmaTotals dma_totals(const NetworkSpec& n) {
  DmaTotals t;
  for (const auto& l : n.layers) {
    const LayerWorkload f = layer_workload(l, Pass::kForward);
    const LayerWorkload b = layer_workload(l, Pass::kBackward);
    t.inference += f.d_dma() * l.repeat;
    t.training += (f.d_dma() + b.d_dma()) * l.repeat;
  }
  return t;
}

struct Golden {
  const char* name;
  std::int64_t params_b, acts_b, peak_b;
  std::int64_t macs_inf, cycles_train, flops_train;
  std::int64_t d_train_b, d_inf_b;
  // published footprint row: params, activations, BS=1 total, BS>1 total (MB)
  double mb[4];
};

// The footprint rows are checked two ways: exactly against this module's own
// frozen accounting (regression pinning) and within 5% of the published
// table (external anchor).
const Golden kGoldens[] = {
    {"alexnet", 243860896, 5760032, 1161600, 728552384, 2179577824,
     4352798272, 896863144, 304547396, {232.5, 6.0, 238.5, 471.0}},
    {"googlenet", 27994208, 45310752, 3211264, 1602719536, 4775116384,
     9523132000, 571998560, 222834368, {26.7, 46.5, 73.2, 99.8}},
    {"inception_v3", 92122144, 94435104, 5531904, 5519324192, 16502768288,
     32960580032, 1730334640, 635889976, {90.8, 99.2, 190.0, 280.8}},
    {"resnet34", 184768928, 29306784, 3211264, 3675818496, 11019101184,
     22026310656, 1393946912, 533249600, {176.2, 28.3, 204.5, 380.6}},
    {"resnet50", 167642528, 68517792, 3211264, 3890930688, 11654465536,
     23277537280, 1890646304, 670144064, {174.6, 67.1, 241.7, 416.3}},
    {"resnet152", 305989024, 157931424, 3211264, 11334439936, 33965926400,
     67862325248, 4373051680, 1635948096, {306.4, 154.4, 460.7, 767.1}},
    {"lstm512", 8396800, 26624, 10240, 2101760, 6300672, 12592128, 926464,
     332032, {0, 0, 0, 0}},
};

}  // namespace

TEST_CASE("shipped network descriptions load and validate") {
  for (const char* name :
       {"alexnet", "googlenet", "inception_v3", "resnet34", "resnet50",
        "resnet152", "lstm512"}) {
    const NetworkSpec n = load(name);
    CHECK(n.name == name);
    CHECK(!n.layers.empty());
    CHECK(n.layers.front().in == n.input);
  }
}

TEST_CASE("malformed descriptions are rejected") {
  const char* head = R"({"name":"t","input":[3,8,8],"layers":[)";
  auto net = [&](const std::string& layer) {
    return parse_network(std::string(head) + layer + "]}");
  };

  CHECK_THROWS_AS(net(R"({"kind":"warp","in":[3,8,8],"out":[3,8,8]})"),
                  NetworkError);
  // declared output inconsistent with the window
  CHECK_THROWS_AS(
      net(R"({"kind":"conv","in":[3,8,8],"out":[4,8,8],"kernel":[3,3],)"
          R"("stride":1,"pad":[0,0],"params":108})"),
      NetworkError);
  CHECK_THROWS_AS(
      net(R"({"kind":"relu","in":[3,8,8],"out":[3,8,8],"repeat":0})"),
      NetworkError);
  // parameter count must match the window (with or without biases)
  CHECK_THROWS_AS(
      net(R"({"kind":"conv","in":[3,8,8],"out":[4,6,6],"kernel":[3,3],)"
          R"("stride":1,"pad":[0,0],"params":100})"),
      NetworkError);
  CHECK_THROWS_AS(
      net(R"({"kind":"conv","in":[3,8,8],"out":[4,6,6],"kernel":[3,3],)"
          R"("stride":1,"pad":[0,0],"store_idx":true})"),
      NetworkError);
  // first layer must consume the declared network input
  CHECK_THROWS_AS(net(R"({"kind":"relu","in":[4,8,8],"out":[4,8,8]})"),
                  NetworkError);
  CHECK_THROWS_AS(parse_network("{not json"), NetworkError);
  CHECK_THROWS_AS(parse_network(R"({"name":"t","layers":[]})"), NetworkError);
}

TEST_CASE("convolution MAC count matches the closed form") {
  // 1x1 reduction over 256 channels onto a 28x28x64 slab
  const LayerSpec l = make_conv(256, 28, 28, 64, 1, 1, 1, 0);
  const LayerWorkload w = layer_workload(l, Pass::kInference);
  CHECK(w.macs == 12845056);
  CHECK(w.n_c() == 12845056);
  CHECK(w.other_ops == 0);

  // a training pass runs forward, backward-data and backward-weight, each
  // the same lowered MAC volume
  const LayerWorkload b = layer_workload(l, Pass::kBackward);
  CHECK(b.macs == 2 * w.macs);
  CHECK(w.macs + b.macs == 3 * w.macs);
}

TEST_CASE("convolution MACs agree with a brute-force loop-nest counter") {
  std::mt19937 rng(0x6e657401);
  auto pick = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  for (int trial = 0; trial < 3; ++trial) {
    const int k = 2 * pick(0, 2) + 1;  // 1, 3, 5
    const int stride = pick(1, 2), pad = pick(0, 1) ? k / 2 : 0;
    const int cin = pick(1, 16), cout = pick(1, 12);
    const int hin = pick(k, 24), win = pick(k, 24);
    const LayerSpec l = make_conv(cin, hin, win, cout, k, k, stride, pad);
    REQUIRE(l.out.h >= 1);
    REQUIRE(l.out.w >= 1);

    std::int64_t counted = 0;
    for (int co = 0; co < l.out.c; ++co)
      for (int ho = 0; ho < l.out.h; ++ho)
        for (int wo = 0; wo < l.out.w; ++wo)
          for (int uh = 0; uh < k; ++uh)
            for (int uw = 0; uw < k; ++uw)
              for (int ci = 0; ci < cin; ++ci) ++counted;

    CHECK(layer_workload(l, Pass::kInference).macs == counted);
  }
}

TEST_CASE("elementwise and pooling workloads follow the datapath accounting") {
  LayerSpec r;
  r.kind = LayerKind::kRelu;
  r.in = r.out = {16, 10, 10};
  const std::int64_t e = r.out.elems();
  const LayerWorkload wf = layer_workload(r, Pass::kInference);
  CHECK(wf.n_c() == e);            // one comparison per element
  CHECK(wf.d_par == 2.0 * 4 * e);  // read plus write of the whole tensor
  CHECK(wf.d_head == 0.0);
  CHECK(wf.d_tail == 0.0);
  const LayerWorkload wb = layer_workload(r, Pass::kBackward);
  CHECK(wb.n_c() == e);
  CHECK(wb.d_par == 2.0 * 4 * e);

  LayerSpec p;
  p.kind = LayerKind::kMaxPool;
  p.in = {16, 10, 10};
  p.out = {16, 4, 4};
  p.kh = p.kw = 3;
  p.stride = 2;
  p.store_idx = true;
  const LayerWorkload pf = layer_workload(p, Pass::kInference);
  CHECK(pf.n_c() == p.out.elems() * 9);
  CHECK(pf.act_bytes == 2 * 4 * p.out.elems());  // values and winner indices

  LayerSpec c;
  c.kind = LayerKind::kConcat;
  c.in = c.out = {32, 7, 7};
  CHECK(layer_workload(c, Pass::kInference).n_c() == 0);
  CHECK(layer_workload(c, Pass::kInference).d_par == 2.0 * 4 * c.out.elems());
}

TEST_CASE("matrix layers amortize weight streaming by the reuse batch") {
  LayerSpec l;
  l.kind = LayerKind::kLinear;
  l.in = {512, 1, 1};
  l.out = {512, 1, 1};
  l.params = 512 * 512 + 512;

  for (int batch : {1, 32}) {
    l.batch = batch;
    const LayerWorkload w = layer_workload(l, Pass::kInference);
    const double wtr = l.params * 4.0 / batch;
    CHECK(w.d_dma() == doctest::Approx(512 * 4 + wtr + 512 * 4));
    CHECK(w.macs == 512 * 512);
  }
  // the resident half of the scratchpad caps what counts as head
  l.batch = 1;
  CHECK(layer_workload(l, Pass::kInference).d_head == 512 * 4 + 65536.0);
}

TEST_CASE("a fused cell layer equals its gate decomposition") {
  LayerSpec cell;
  cell.kind = LayerKind::kLstmCell;
  cell.in = {512, 1, 1};
  cell.out = {512, 1, 1};
  cell.batch = 32;
  cell.params = 4 * (512 * 512 + 512 * 512) + 4 * 512;

  const NetworkSpec dec = load("lstm512");
  std::int64_t macs = 0, other = 0;
  double head = 0, par = 0, tail = 0;
  for (const auto& l : dec.layers) {
    for (Pass p : {Pass::kForward, Pass::kBackward}) {
      const LayerWorkload w = layer_workload(l, p);
      macs += w.macs;
      other += w.other_ops;
      head += w.d_head;
      par += w.d_par;
      tail += w.d_tail;
    }
  }
  LayerWorkload f = layer_workload(cell, Pass::kForward);
  const LayerWorkload b = layer_workload(cell, Pass::kBackward);
  CHECK(f.macs + b.macs == macs);
  CHECK(f.other_ops + b.other_ops == other);
  CHECK(f.d_head + b.d_head == doctest::Approx(head));
  CHECK(f.d_par + b.d_par == doctest::Approx(par));
  CHECK(f.d_tail + b.d_tail == doctest::Approx(tail));
}

TEST_CASE("memory footprints match the frozen accounting and the published "
          "table") {
  for (const Golden& g : kGoldens) {
    CAPTURE(g.name);
    const NetworkSpec n = load(g.name);
    const Footprint inf = network_memory_footprint(n, Regime::kInference);
    const Footprint bs1 = network_memory_footprint(n, Regime::kTrainBs1);
    const Footprint bsn = network_memory_footprint(n, Regime::kTrainBsN);

    CHECK(inf.param_bytes == g.params_b);
    CHECK(inf.act_bytes == g.peak_b);
    CHECK(bs1.act_bytes == g.acts_b);
    CHECK(bs1.total_bytes == g.params_b + g.acts_b);
    // one extra parameter-sized gradient accumulator, nothing else
    CHECK(bsn.total_bytes - bs1.total_bytes == g.params_b);
    CHECK(bs1.act_bytes >= inf.act_bytes);

    if (g.mb[0] > 0) {
      CHECK(bs1.param_mb() == doctest::Approx(g.mb[0]).epsilon(0.05));
      CHECK(bs1.act_mb() == doctest::Approx(g.mb[1]).epsilon(0.05));
      CHECK(bs1.total_mb() == doctest::Approx(g.mb[2]).epsilon(0.05));
      CHECK(bsn.total_mb() == doctest::Approx(g.mb[3]).epsilon(0.05));
    }
  }
}

TEST_CASE("resnet-34 convolution activations match the published counts") {
  const NetworkSpec n = load("resnet34");
  std::int64_t peak = 0, sum = 0;
  for (const auto& l : n.layers) {
    if (l.kind != LayerKind::kConv) continue;
    const std::int64_t e = l.out.elems() * l.repeat;
    peak = std::max(peak, l.out.elems());
    sum += e;
  }
  CHECK(peak == doctest::Approx(803000.0).epsilon(0.05));
  CHECK(sum == doctest::Approx(3560000.0).epsilon(0.05));
}

TEST_CASE("op totals match the frozen calibration") {
  for (const Golden& g : kGoldens) {
    CAPTURE(g.name);
    const NetworkSpec n = load(g.name);
    const OpCounts inf = inference_ops(n);
    const OpCounts train = training_step_ops(n);
    CHECK(inf.cycles() == g.macs_inf);
    CHECK(train.cycles() == g.cycles_train);
    CHECK(train.flops() == g.flops_train);
    CHECK(train.macs >= inf.macs);
    CHECK(train.other >= inf.other);
  }
}

TEST_CASE("dma byte totals match the frozen calibration") {
  for (const Golden& g : kGoldens) {
    CAPTURE(g.name);
    const DmaTotals t = dma_totals(load(g.name));
    CHECK(std::llround(t.inference) == g.d_inf_b);
    CHECK(std::llround(t.training) == g.d_train_b);
  }
}

TEST_CASE("workload components are non-negative across all shipped layers") {
  for (const Golden& g : kGoldens) {
    const NetworkSpec n = load(g.name);
    for (const auto& l : n.layers)
      for (Pass p : {Pass::kInference, Pass::kBackward}) {
        const LayerWorkload w = layer_workload(l, p);
        CHECK(w.macs >= 0);
        CHECK(w.other_ops >= 0);
        CHECK(w.d_head >= 0.0);
        CHECK(w.d_par >= 0.0);
        CHECK(w.d_tail >= 0.0);
        CHECK(w.d_dma() == w.d_head + w.d_par + w.d_tail);
      }
  }
}

TEST_CASE("stored activations tie layer accounting to the footprint") {
  for (const char* name : {"googlenet", "resnet50"}) {
    const NetworkSpec n = load(name);
    std::int64_t acts = 0;
    for (const auto& l : n.layers)
      acts += layer_workload(l, Pass::kForward).act_bytes * l.repeat;
    CHECK(acts == network_memory_footprint(n, Regime::kTrainBs1).act_bytes);
  }
}

TEST_CASE("a repeated layer equals its explicit duplication") {
  const char* repeated = R"({"name":"a","input":[4,8,8],"layers":[
    {"kind":"conv","in":[4,8,8],"out":[8,8,8],"kernel":[3,3],"stride":1,
     "pad":[1,1],"params":296},
    {"kind":"relu","in":[8,8,8],"out":[8,8,8],"repeat":3}]})";
  const char* expanded = R"({"name":"b","input":[4,8,8],"layers":[
    {"kind":"conv","in":[4,8,8],"out":[8,8,8],"kernel":[3,3],"stride":1,
     "pad":[1,1],"params":296},
    {"kind":"relu","in":[8,8,8],"out":[8,8,8]},
    {"kind":"relu","in":[8,8,8],"out":[8,8,8]},
    {"kind":"relu","in":[8,8,8],"out":[8,8,8]}]})";
  const NetworkSpec a = parse_network(repeated);
  const NetworkSpec b = parse_network(expanded);
  CHECK(training_step_ops(a).cycles() == training_step_ops(b).cycles());
  CHECK(inference_ops(a).macs == inference_ops(b).macs);
  CHECK(network_memory_footprint(a, Regime::kTrainBs1).total_bytes ==
        network_memory_footprint(b, Regime::kTrainBs1).total_bytes);
  CHECK(dma_totals(a).training == doctest::Approx(dma_totals(b).training));
}

TEST_CASE("degenerate networks") {
  const NetworkSpec empty =
      parse_network(R"({"name":"e","input":[1,1,1],"layers":[]})");
  CHECK(training_step_ops(empty).cycles() == 0);
  CHECK(network_memory_footprint(empty, Regime::kTrainBsN).total_bytes == 0);

  // a single 1x1 convolution: one weight plus, by default, one bias
  const NetworkSpec biased = parse_network(
      R"({"name":"s","input":[1,1,1],"layers":[
        {"kind":"conv","in":[1,1,1],"out":[1,1,1],"kernel":[1,1],
         "stride":1,"pad":[0,0]}]})");
  CHECK(network_memory_footprint(biased, Regime::kInference).param_bytes == 8);
  const NetworkSpec lean = parse_network(
      R"({"name":"s","input":[1,1,1],"layers":[
        {"kind":"conv","in":[1,1,1],"out":[1,1,1],"kernel":[1,1],
         "stride":1,"pad":[0,0],"params":1}]})");
  CHECK(network_memory_footprint(lean, Regime::kInference).param_bytes == 4);
}
