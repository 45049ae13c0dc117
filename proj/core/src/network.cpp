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

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace ntx {

namespace {

constexpr std::int64_t kValueBytes = 4;
constexpr std::int64_t kTcdmBytes = 128 * 1024;

// Convolution DMA tile policy: output tiles of kTileRows rows by kTileChans
// channels (one output channel per co-processor). Three rows keep the
// double-buffered input slab plus weight and output blocks inside the
// scratchpad for the deepest shipped layers without channel-splitting most
// of them.
constexpr std::int64_t kTileRows = 3;
constexpr std::int64_t kTileChans = 8;

std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
  return (a + b - 1) / b;
}

struct Plan {
  std::int64_t traffic = 0;  // total bytes moved
  std::int64_t head = 0;     // resident before the first command
  std::int64_t tail = 0;     // last output block
};

// Forward (and, with swapped roles, backward-data) convolution traffic. The
// input slab for a row group stays resident; weight blocks are re-streamed
// once per row group. When a slab overflows the scratchpad it is split
// channel-wise, which changes the head but not the total traffic.
Plan conv_plan(std::int64_t cin, std::int64_t hin, std::int64_t win,
               std::int64_t cout, std::int64_t hout, std::int64_t wout,
               std::int64_t kh, std::int64_t kw, std::int64_t s) {
  const std::int64_t ct = std::min(kTileChans, cout);
  const std::int64_t ht = std::min(kTileRows, hout);
  const std::int64_t rows = std::min(hin, ht * s + kh - s);
  const std::int64_t ot = ct * ht * wout * kValueBytes;
  const std::int64_t ncb = ceil_div(cout, ct);
  std::int64_t cib = cin;
  while (cib > 1 && cib * rows * win * kValueBytes +
                            2 * kh * kw * cib * ct * kValueBytes + 2 * ot >
                        kTcdmBytes)
    cib -= std::max<std::int64_t>(1, cib / 8);
  const std::int64_t slab_full = cin * rows * win * kValueBytes;
  const std::int64_t wblk_full = kh * kw * cin * ct * kValueBytes;
  const std::int64_t nht = ceil_div(hout, ht);
  const std::int64_t out_bytes = cout * hout * wout * kValueBytes;
  Plan p;
  p.traffic = nht * (slab_full + ncb * wblk_full) + out_bytes;
  p.head = cib * rows * win * kValueBytes + kh * kw * cib * ct * kValueBytes;
  p.tail = ot;
  return p;
}

// Backward-weight traffic: dw[ci, co] blocks accumulate in the scratchpad
// while x (per in-channel slice) and dy (per out-channel slice) stream
// through; x is re-streamed once per out-channel block sweep.
Plan convw_plan(std::int64_t cin, std::int64_t hin, std::int64_t win,
                std::int64_t cout, std::int64_t hout, std::int64_t wout,
                std::int64_t kh, std::int64_t kw) {
  const std::int64_t x_bytes = cin * hin * win * kValueBytes;
  const std::int64_t dy_bytes = cout * hout * wout * kValueBytes;
  const std::int64_t dw_bytes = kh * kw * cin * cout * kValueBytes;
  bool found = false;
  Plan best;
  for (std::int64_t cit : {1, 2, 4, 8, 16, 32, 64, 128}) {
    if (cit > cin) continue;
    for (std::int64_t cot : {1, 2, 4, 8, 16, 32, 64}) {
      if (cot > cout) continue;
      const std::int64_t dwb = kh * kw * cit * cot * kValueBytes;
      const std::int64_t xs = cit * kh * win * kValueBytes * 2;
      const std::int64_t ys = cot * wout * kValueBytes * 2;
      if (dwb + 2 * xs + 2 * ys > kTcdmBytes) continue;
      const std::int64_t tr = ceil_div(cout, cot) * x_bytes +
                              ceil_div(cin, cit) * dy_bytes + dw_bytes;
      if (!found || tr < best.traffic) {
        best = {tr, xs + ys, dwb};
        found = true;
      }
    }
  }
  if (!found)
    best = {x_bytes * 2 + dy_bytes * 2 + dw_bytes,
            x_bytes / std::max<std::int64_t>(1, hin), dw_bytes};
  return best;
}

struct Volume {
  double head = 0.0, par = 0.0, tail = 0.0;
};

struct Ops {
  std::int64_t macs = 0, other = 0;
};

std::vector<LayerSpec> expand_lstm_cell(const LayerSpec& l) {
  const std::int64_t ci = l.in.c, co = l.out.c;
  const bool bias = l.params != 4 * (ci * co + co * co);
  std::vector<LayerSpec> out;
  for (int g = 0; g < 4; ++g) {
    LayerSpec w;  // input projection
    w.kind = LayerKind::kLinear;
    w.in = {l.in.c, 1, 1};
    w.out = {l.out.c, 1, 1};
    w.params = ci * co + (bias ? co : 0);
    w.batch = l.batch;
    out.push_back(w);
    LayerSpec u = w;  // recurrent projection, never biased twice
    u.in = {l.out.c, 1, 1};
    u.params = co * co;
    out.push_back(u);
    LayerSpec a;
    a.kind = LayerKind::kAdd;
    a.in = a.out = {l.out.c, 1, 1};
    a.store = false;
    out.push_back(a);
  }
  LayerSpec e;  // gate nonlinearities and the cell/hidden update
  e.kind = LayerKind::kRelu;
  e.in = e.out = {5 * l.out.c, 1, 1};
  out.push_back(e);
  return out;
}

Ops layer_ops(const LayerSpec& l, bool train) {
  const std::int64_t eo = l.out.elems();
  switch (l.kind) {
    case LayerKind::kConv: {
      const std::int64_t m =
          eo * std::int64_t(l.kh) * l.kw * l.in.c;
      return {train ? 3 * m : m, 0};
    }
    case LayerKind::kLinear: {
      const std::int64_t m = l.in.elems() * l.out.elems();
      return {train ? 3 * m : m, 0};
    }
    case LayerKind::kRelu:
      return {0, train ? 2 * eo : eo};
    case LayerKind::kMaxPool:
    case LayerKind::kAvgPool: {
      const std::int64_t f = eo * std::int64_t(l.kh) * l.kw;
      return {0, train ? f + eo : f};
    }
    case LayerKind::kLrn:
      return {0, train ? 8 * eo : 5 * eo};
    case LayerKind::kSoftmax:
      return {0, train ? 7 * eo : 4 * eo};
    case LayerKind::kConcat:
      return {0, 0};
    case LayerKind::kAdd:
      return {0, train ? 2 * eo : eo};
    case LayerKind::kLstmCell: {
      Ops sum;
      for (const auto& sub : expand_lstm_cell(l)) {
        const Ops o = layer_ops(sub, train);
        sum.macs += o.macs;
        sum.other += o.other;
      }
      return sum;
    }
  }
  throw NetworkError("unsupported layer kind");
}

Volume layer_dma(const LayerSpec& l, bool train) {
  const double eo = static_cast<double>(l.out.elems() * kValueBytes);
  const double ei = static_cast<double>(l.in.elems() * kValueBytes);
  switch (l.kind) {
    case LayerKind::kConv: {
      const Plan f = conv_plan(l.in.c, l.in.h, l.in.w, l.out.c, l.out.h,
                               l.out.w, l.kh, l.kw, l.stride);
      if (!train)
        return {double(f.head), double(f.traffic - f.head - f.tail),
                double(f.tail)};
      // backward-data is the transposed convolution on dy (unit stride);
      // backward-weight streams x and dy against resident dw blocks
      const Plan b = conv_plan(l.out.c, l.out.h, l.out.w, l.in.c, l.in.h,
                               l.in.w, l.kh, l.kw, 1);
      const Plan w = convw_plan(l.in.c, l.in.h, l.in.w, l.out.c, l.out.h,
                                l.out.w, l.kh, l.kw);
      const std::int64_t head = f.head + b.head + w.head;
      const std::int64_t tail = f.tail + b.tail + w.tail;
      return {double(head),
              double(f.traffic + b.traffic + w.traffic - head - tail),
              double(tail)};
    }
    case LayerKind::kLinear: {
      // weights dominate; the reuse batch amortizes weight streaming
      const double wtr =
          static_cast<double>(l.params * kValueBytes) / l.batch;
      const double resident = std::min(wtr, double(kTcdmBytes / 2));
      if (!train) return {ei + resident, std::max(0.0, wtr - resident), eo};
      const double tr = 3 * wtr + 2 * ei + 2 * eo;
      return {ei + resident, tr - ei - eo - resident, eo};
    }
    case LayerKind::kMaxPool:
    case LayerKind::kAvgPool: {
      double d = ei + eo + (l.store_idx ? eo : 0.0);
      if (train) d += 2 * eo + ei;  // scatter pass: read dy (+idx), write dx
      return {0.0, d, 0.0};
    }
    case LayerKind::kRelu:
    case LayerKind::kLrn:
    case LayerKind::kSoftmax:
    case LayerKind::kConcat:
    case LayerKind::kAdd:
      return {0.0, (ei + eo) * (train ? 2 : 1), 0.0};
    case LayerKind::kLstmCell: {
      Volume sum;
      for (const auto& sub : expand_lstm_cell(l)) {
        const Volume v = layer_dma(sub, train);
        sum.head += v.head;
        sum.par += v.par;
        sum.tail += v.tail;
      }
      return sum;
    }
  }
  throw NetworkError("unsupported layer kind");
}

const std::map<std::string, LayerKind>& kind_names() {
  static const std::map<std::string, LayerKind> m = {
      {"conv", LayerKind::kConv},         {"linear", LayerKind::kLinear},
      {"maxpool", LayerKind::kMaxPool},   {"avgpool", LayerKind::kAvgPool},
      {"relu", LayerKind::kRelu},         {"lrn", LayerKind::kLrn},
      {"batchnorm", LayerKind::kLrn},     {"softmax", LayerKind::kSoftmax},
      {"concat", LayerKind::kConcat},     {"add", LayerKind::kAdd},
      {"residual-add", LayerKind::kAdd},  {"lstm-cell", LayerKind::kLstmCell},
  };
  return m;
}

bool windowed(LayerKind k) {
  return k == LayerKind::kConv || k == LayerKind::kMaxPool ||
         k == LayerKind::kAvgPool;
}

}  // namespace

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kLinear: return "linear";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kAvgPool: return "avgpool";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kLrn: return "lrn";
    case LayerKind::kSoftmax: return "softmax";
    case LayerKind::kConcat: return "concat";
    case LayerKind::kAdd: return "add";
    case LayerKind::kLstmCell: return "lstm-cell";
  }
  return "?";
}

namespace {

[[noreturn]] void fail(const LayerSpec& l, const std::string& what) {
  throw NetworkError("layer '" + l.name + "': " + what);
}

void validate_layer(const LayerSpec& l) {
  if (l.repeat < 1) fail(l, "repetition count must be >= 1");
  if (l.batch < 1) fail(l, "weight-reuse batch must be >= 1");
  if (l.in.c < 1 || l.in.h < 1 || l.in.w < 1 || l.out.c < 1 || l.out.h < 1 ||
      l.out.w < 1)
    fail(l, "shapes must be positive");
  if (l.params < 0) fail(l, "negative parameter count");
  if (l.store_idx && l.kind != LayerKind::kMaxPool)
    fail(l, "winner indices only exist for max pooling");

  if (windowed(l.kind)) {
    if (l.kh < 1 || l.kw < 1 || l.stride < 1 || l.pad_h < 0 || l.pad_w < 0)
      fail(l, "bad window geometry");
    const int nh = l.in.h + 2 * l.pad_h - l.kh;
    const int nw = l.in.w + 2 * l.pad_w - l.kw;
    if (nh < 0 || nw < 0) fail(l, "window larger than padded input");
    const int fh = nh / l.stride + 1, fw = nw / l.stride + 1;
    if (l.kind == LayerKind::kConv) {
      if (l.out.h != fh || l.out.w != fw)
        fail(l, "output size inconsistent with window geometry");
    } else {
      // pools may round the overhang up (ceil mode) or down
      const int ch = (nh + l.stride - 1) / l.stride + 1;
      const int cw = (nw + l.stride - 1) / l.stride + 1;
      if ((l.out.h != fh && l.out.h != ch) || (l.out.w != fw && l.out.w != cw))
        fail(l, "output size inconsistent with window geometry");
      if (l.out.c != l.in.c) fail(l, "pooling preserves channels");
    }
  }

  switch (l.kind) {
    case LayerKind::kConv: {
      const std::int64_t base =
          std::int64_t(l.kh) * l.kw * l.in.c * l.out.c;
      if (l.params != base && l.params != base + l.out.c)
        fail(l, "parameter count inconsistent with window geometry");
      break;
    }
    case LayerKind::kLinear: {
      if (l.in.h != 1 || l.in.w != 1 || l.out.h != 1 || l.out.w != 1)
        fail(l, "matrix layers take flattened shapes");
      const std::int64_t base = l.in.elems() * l.out.elems();
      if (l.params != base && l.params != base + l.out.elems())
        fail(l, "parameter count inconsistent with shapes");
      break;
    }
    case LayerKind::kLstmCell: {
      if (l.in.h != 1 || l.in.w != 1 || l.out.h != 1 || l.out.w != 1)
        fail(l, "cell layers take flattened shapes");
      const std::int64_t ci = l.in.c, co = l.out.c;
      const std::int64_t base = 4 * (ci * co + co * co);
      if (l.params != base && l.params != base + 4 * co)
        fail(l, "parameter count inconsistent with shapes");
      break;
    }
    case LayerKind::kRelu:
    case LayerKind::kLrn:
    case LayerKind::kSoftmax:
    case LayerKind::kAdd:
      if (!(l.out == l.in)) fail(l, "elementwise layers preserve shape");
      break;
    case LayerKind::kConcat:
      // fan-in is declared pre-joined: both shapes carry the joined channels
      if (l.out.h != l.in.h || l.out.w != l.in.w || l.out.c != l.in.c)
        fail(l, "concatenation preserves the joined shape");
      break;
    case LayerKind::kMaxPool:
    case LayerKind::kAvgPool:
      break;
  }
}

std::int64_t default_params(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::kConv:  // biased by default
      return std::int64_t(l.kh) * l.kw * l.in.c * l.out.c + l.out.c;
    case LayerKind::kLinear:
      return l.in.elems() * l.out.elems() + l.out.elems();
    case LayerKind::kLstmCell: {
      const std::int64_t ci = l.in.c, co = l.out.c;
      return 4 * (ci * co + co * co) + 4 * co;
    }
    default:
      return 0;
  }
}

}  // namespace

void validate(const NetworkSpec& n) {
  if (n.input.c < 1 || n.input.h < 1 || n.input.w < 1)
    throw NetworkError("network input shape must be positive");
  for (const auto& l : n.layers) validate_layer(l);
  if (!n.layers.empty() && !(n.layers.front().in == n.input))
    throw NetworkError("first layer does not consume the network input");
}

NetworkSpec parse_network(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw NetworkError(std::string("bad network JSON: ") + e.what());
  }
  try {
    NetworkSpec n;
    n.name = j.value("name", "");
    const auto& in = j.at("input");
    n.input = {in.at(0).get<int>(), in.at(1).get<int>(), in.at(2).get<int>()};
    for (const auto& jl : j.at("layers")) {
      LayerSpec l;
      const std::string kind = jl.at("kind").get<std::string>();
      const auto it = kind_names().find(kind);
      if (it == kind_names().end())
        throw NetworkError("unsupported layer kind '" + kind + "'");
      l.kind = it->second;
      l.name = jl.value("name", kind);
      const auto& li = jl.at("in");
      const auto& lo = jl.at("out");
      l.in = {li.at(0).get<int>(), li.at(1).get<int>(), li.at(2).get<int>()};
      l.out = {lo.at(0).get<int>(), lo.at(1).get<int>(), lo.at(2).get<int>()};
      if (jl.contains("kernel")) {
        const auto& k = jl.at("kernel");
        if (k.is_array()) {
          l.kh = k.at(0).get<int>();
          l.kw = k.at(1).get<int>();
        } else {
          l.kh = l.kw = k.get<int>();
        }
      }
      l.stride = jl.value("stride", 1);
      if (jl.contains("pad")) {
        const auto& p = jl.at("pad");
        if (p.is_array()) {
          l.pad_h = p.at(0).get<int>();
          l.pad_w = p.at(1).get<int>();
        } else {
          l.pad_h = l.pad_w = p.get<int>();
        }
      }
      l.store = jl.value("store", true);
      l.store_idx = jl.value("store_idx", false);
      l.batch = jl.value("batch", 1);
      l.repeat = jl.value("repeat", 1);
      l.params = jl.contains("params") ? jl.at("params").get<std::int64_t>()
                                       : default_params(l);
      n.layers.push_back(std::move(l));
    }
    validate(n);
    return n;
  } catch (const nlohmann::json::exception& e) {
    throw NetworkError(std::string("bad network JSON: ") + e.what());
  }
}

NetworkSpec load_network(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw NetworkError("cannot open " + file.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_network(ss.str());
}

LayerWorkload layer_workload(const LayerSpec& l, Pass pass) {
  validate_layer(l);
  LayerWorkload w;
  w.param_bytes = l.params * kValueBytes;
  w.act_bytes = l.out.elems() * kValueBytes *
                ((l.store ? 1 : 0) + (l.store_idx ? 1 : 0));
  const Ops fwd = layer_ops(l, false);
  const Volume dfwd = layer_dma(l, false);
  if (pass == Pass::kBackward) {
    const Ops train = layer_ops(l, true);
    const Volume dtrain = layer_dma(l, true);
    w.macs = train.macs - fwd.macs;
    w.other_ops = train.other - fwd.other;
    w.d_head = dtrain.head - dfwd.head;
    w.d_par = dtrain.par - dfwd.par;
    w.d_tail = dtrain.tail - dfwd.tail;
  } else {
    w.macs = fwd.macs;
    w.other_ops = fwd.other;
    w.d_head = dfwd.head;
    w.d_par = dfwd.par;
    w.d_tail = dfwd.tail;
  }
  return w;
}

Footprint network_memory_footprint(const NetworkSpec& n, Regime r) {
  std::int64_t params = 0, acts = 0, peak = 0;
  for (const auto& l : n.layers) {
    const std::int64_t out = l.out.elems() * kValueBytes;
    params += l.params * kValueBytes * l.repeat;
    peak = std::max(peak, out);
    acts += out * l.repeat * ((l.store ? 1 : 0) + (l.store_idx ? 1 : 0));
  }
  Footprint f;
  f.param_bytes = params;
  f.act_bytes = r == Regime::kInference ? peak : acts;
  f.total_bytes = f.param_bytes + f.act_bytes +
                  (r == Regime::kTrainBsN ? params : 0);
  return f;
}

namespace {

OpCounts total_ops(const NetworkSpec& n, bool train) {
  OpCounts t;
  for (const auto& l : n.layers) {
    const Ops o = layer_ops(l, train);
    t.macs += o.macs * l.repeat;
    t.other += o.other * l.repeat;
  }
  return t;
}

}  // namespace

OpCounts inference_ops(const NetworkSpec& n) { return total_ops(n, false); }

OpCounts training_step_ops(const NetworkSpec& n) { return total_ops(n, true); }

}  // namespace ntx
