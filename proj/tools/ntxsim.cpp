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
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ntxsim/cluster.hpp"
#include "ntxsim/datacenter.hpp"
#include "ntxsim/mesh.hpp"
#include "ntxsim/network.hpp"
#include "ntxsim/perf.hpp"
#include "verify.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

#ifndef NTXSIM_CONFIG_DIR
#define NTXSIM_CONFIG_DIR "configs"
#endif

namespace {

fs::path config_dir() {
  if (const char* env = std::getenv("NTXSIM_CONFIG_DIR")) return env;
  return NTXSIM_CONFIG_DIR;
}

std::vector<std::string> list_configs(const std::string& subdir) {
  std::vector<std::string> names;
  std::error_code ec;
  for (const auto& e :
       fs::directory_iterator(config_dir() / subdir, ec))
    if (e.path().extension() == ".json")
      names.push_back(e.path().stem().string());
  std::sort(names.begin(), names.end());
  return names;
}

// A bare name maps into the config tree; an existing file path wins.
fs::path resolve_config(const std::string& arg, const std::string& subdir) {
  if (fs::exists(arg)) return arg;
  const fs::path p = config_dir() / subdir / (arg + ".json");
  if (fs::exists(p)) return p;
  std::ostringstream msg;
  msg << "unknown " << subdir << " config '" << arg << "'; available:";
  for (const auto& n : list_configs(subdir)) msg << ' ' << n;
  throw ntx::ConfigError(msg.str());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ntx::ConfigError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Sink {
  std::ofstream file;
  std::ostream& open(const std::string& path) {
    if (path.empty()) return std::cout;
    file.open(path);
    if (!file) throw ntx::ConfigError("cannot write " + path);
    return file;
  }
};

int cmd_verify(std::uint64_t seed, int cases, const std::string& fault,
               const std::string& format, const std::string& out_path) {
  const auto suites = ntx::verify::run_all(seed, cases, fault);
  std::string failing;
  for (const auto& s : suites)
    if (!s.ok()) {
      failing = s.name + "/" + s.first_failure;
      break;
    }
  Sink sink;
  std::ostream& os = sink.open(out_path);
  if (format == "json") {
    json j;
    j["seed"] = seed;
    j["suites"] = json::array();
    for (const auto& s : suites) {
      json js{{"name", s.name}, {"passed", s.passed}, {"total", s.total}};
      if (!s.ok()) js["first_failure"] = s.first_failure;
      j["suites"].push_back(js);
    }
    j["status"] = failing.empty() ? "pass" : "fail";
    if (!failing.empty()) j["failing_property"] = failing;
    os << j.dump(2) << '\n';
  } else {
    os << "seed: " << seed << '\n';
    for (const auto& s : suites) {
      os << "suite " << s.name << ": " << s.passed << '/' << s.total
         << " passed";
      if (!s.ok()) os << " (first failure: " << s.first_failure << ')';
      os << '\n';
    }
    os << "verify: " << (failing.empty() ? "PASS" : "FAIL " + failing)
       << '\n';
  }
  return failing.empty() ? 0 : 1;
}

struct LayerRow {
  std::string name, kind;
  int repeat = 1;
  std::int64_t flops = 0;
  double t_ms = 0.0, b_gbps = 0.0, p_w = 0.0, eff = 0.0;
};

LayerRow model_row(const ntx::LayerSpec& l, bool train,
                   const ntx::ArchConfig& a) {
  ntx::LayerWorkload w = ntx::layer_workload(
      l, train ? ntx::Pass::kForward : ntx::Pass::kInference);
  if (train) {
    const auto bw = ntx::layer_workload(l, ntx::Pass::kBackward);
    w.macs += bw.macs;
    w.other_ops += bw.other_ops;
    w.d_head += bw.d_head;
    w.d_par += bw.d_par;
    w.d_tail += bw.d_tail;
  }
  const auto kt = ntx::kernel_timing(w, a);
  LayerRow r;
  r.name = l.name;
  r.kind = ntx::kind_name(l.kind);
  r.repeat = l.repeat;
  r.flops = w.flops() * l.repeat;
  r.t_ms = kt.t_cl / a.clusters * l.repeat * 1e3;
  r.b_gbps = std::min(kt.b_cl * a.clusters, a.b_max) / 1e9;
  r.p_w = ntx::dram_power(r.b_gbps * 1e9, a) + a.clusters * kt.p_cl;
  r.eff = r.t_ms > 0.0 ? double(r.flops) / (r.t_ms * 1e-3) / r.p_w / 1e9 : 0.0;
  return r;
}

// Published comparison rows for the model subcommand's --golden check.
struct GoldenRow {
  int clusters;
  bool train;
  double t_ms;
  double eta;  // GFLOP/s/W, negative when the row lists no efficiency
};
constexpr GoldenRow kModelGoldens[] = {
    {16, true, 34.8, 21.0},
    {64, true, 8.69, 38.3},
    {16, false, 11.3, -1.0},
    {64, false, 2.83, -1.0},
};
constexpr double kGoldenTol = 0.15;

int cmd_model(const std::string& network, const std::string& arch_name,
              bool train, bool golden, const std::string& format,
              const std::string& out_path) {
  const ntx::NetworkSpec net =
      ntx::load_network(resolve_config(network, "networks"));
  const ntx::ArchConfig a = ntx::parse_arch(slurp(resolve_config(
      arch_name, "arch")));
  std::vector<LayerRow> rows;
  for (const auto& l : net.layers) rows.push_back(model_row(l, train, a));
  const ntx::NetworkMetrics total = ntx::network_metrics(net, train, a);

  std::vector<std::string> golden_lines;
  bool golden_ok = true;
  if (golden) {
    if (net.name != "googlenet" || a.node != ntx::TechNode::k28)
      throw ntx::ConfigError(
          "golden rows exist only for googlenet on the 28 nm points");
    const GoldenRow* row = nullptr;
    for (const auto& g : kModelGoldens)
      if (g.clusters == a.clusters && g.train == train) row = &g;
    if (!row)
      throw ntx::ConfigError("no golden row for this cluster count");
    auto compare = [&](const char* what, double got, double want,
                       const char* unit) {
      const bool ok = std::abs(got - want) <= kGoldenTol * want;
      std::ostringstream line;
      line << "golden " << what << ' ' << got << ' ' << unit << " vs "
           << want << " (tol +-15%): " << (ok ? "PASS" : "FAIL");
      golden_lines.push_back(line.str());
      golden_ok = golden_ok && ok;
    };
    compare("T", total.t * 1e3, row->t_ms, "ms");
    if (row->eta > 0.0) compare("eta", total.eta / 1e9, row->eta, "GFLOP/s/W");
  }

  Sink sink;
  std::ostream& os = sink.open(out_path);
  if (format == "json") {
    json j;
    j["network"] = net.name;
    j["arch"] = arch_name;
    j["pass"] = train ? "training" : "inference";
    j["layers"] = json::array();
    for (const auto& r : rows)
      j["layers"].push_back({{"layer", r.name},
                             {"kind", r.kind},
                             {"repeat", r.repeat},
                             {"flops", r.flops},
                             {"t_ms", r.t_ms},
                             {"b_GBps", r.b_gbps},
                             {"p_W", r.p_w},
                             {"eff_GFLOPsW", r.eff}});
    j["total"] = {{"t_ms", total.t * 1e3},
                  {"b_GBps", total.b_avg / 1e9},
                  {"p_W", total.p},
                  {"eff_GFLOPsW", total.eta / 1e9},
                  {"flops", total.flops}};
    if (golden) {
      j["golden"] = golden_lines;
      j["golden_status"] = golden_ok ? "pass" : "fail";
    }
    os << j.dump(2) << '\n';
  } else {
    os << "layer,kind,repeat,flops,t_ms,b_GBps,p_W,eff_GFLOPsW\n";
    for (const auto& r : rows)
      os << r.name << ',' << r.kind << ',' << r.repeat << ',' << r.flops
         << ',' << r.t_ms << ',' << r.b_gbps << ',' << r.p_w << ',' << r.eff
         << '\n';
    os << "total,,," << total.flops << ',' << total.t * 1e3 << ','
       << total.b_avg / 1e9 << ',' << total.p << ',' << total.eta / 1e9
       << '\n';
    for (const auto& line : golden_lines) os << line << '\n';
  }
  return golden_ok ? 0 : 1;
}

int cmd_offloads(const std::string& format, const std::string& out_path) {
  struct Row {
    const char* name;
    int cin, hin, cout, k, s, pad;
  };
  // The four convolution shapes of the published offload comparison.
  constexpr Row rows[] = {
      {"conv7x7/2-3x224x224-64", 3, 224, 64, 7, 2, 3},
      {"conv3x3-64x56x56-192", 64, 56, 192, 3, 1, 1},
      {"conv1x1-256x28x28-64", 256, 28, 64, 1, 1, 0},
      {"conv1x1-512x14x14-192", 512, 14, 192, 1, 1, 0},
  };
  Sink sink;
  std::ostream& os = sink.open(out_path);
  json jrows = json::array();
  if (format != "json")
    os << "layer,ns_offloads,ns_cycles,ntx_offloads,ntx_cycles\n";
  for (const Row& r : rows) {
    ntx::LayerSpec l;
    l.kind = ntx::LayerKind::kConv;
    l.name = r.name;
    l.in = {r.cin, r.hin, r.hin};
    const int ho = (r.hin + 2 * r.pad - r.k) / r.s + 1;
    l.out = {r.cout, ho, ho};
    l.kh = l.kw = r.k;
    l.stride = r.s;
    l.pad_h = l.pad_w = r.pad;
    const auto ns = ntx::offload_counts(l, ntx::OffloadArch::kNs);
    const auto hw = ntx::offload_counts(l, ntx::OffloadArch::kNtx);
    if (format == "json")
      jrows.push_back({{"layer", r.name},
                       {"ns_offloads", ns.offloads},
                       {"ns_cycles", ns.cycles},
                       {"ntx_offloads", hw.offloads},
                       {"ntx_cycles", hw.cycles}});
    else
      os << r.name << ',' << ns.offloads << ',' << ns.cycles << ','
         << hw.offloads << ',' << hw.cycles << '\n';
  }
  if (format == "json") os << jrows.dump(2) << '\n';
  return 0;
}

int cmd_sweep(const std::string& arch_name, double step_ghz, double budget,
              const std::string& out_path) {
  const ntx::ArchConfig a = ntx::parse_arch(slurp(resolve_config(
      arch_name, "arch")));
  // Calibration workload: 1 GMAC with a 0.354 GB stream, head 0.1%.
  ntx::LayerWorkload w;
  w.macs = 1000000000;
  w.d_head = 0.354e6;
  w.d_par = 0.354e9 - 0.354e6;
  const auto grid = ntx::vfs_grid(a.node, step_ghz * 1e9);
  const auto r = ntx::vfs_sweep(w, a, grid, budget);
  Sink sink;
  std::ostream& os = sink.open(out_path);
  os << "f_GHz,V,T_s,B_GBps,P_W,eff_GFLOPsW,best\n";
  for (std::size_t i = 0; i < r.curve.size(); ++i) {
    const auto& p = r.curve[i];
    os << p.f_hz / 1e9 << ',' << p.volt << ',' << p.m.t << ','
       << p.m.b / 1e9 << ',' << p.m.p << ',' << p.m.eta / 1e9 << ','
       << (i == r.best ? 1 : 0) << '\n';
  }
  return 0;
}

ntx::MeshConfig parse_mesh(const std::string& text) {
  ntx::MeshConfig m;
  try {
    const json j = json::parse(text);
    if (j.contains("n")) m.n = j.at("n").get<int>();
    if (j.contains("link_gbps"))
      m.link_bw = j.at("link_gbps").get<double>() * 1e9;
    if (j.contains("t_lat_us"))
      m.t_lat = j.at("t_lat_us").get<double>() * 1e-6;
    if (j.contains("weight_mb"))
      m.weight_bytes = j.at("weight_mb").get<double>() * 1e6;
    if (j.contains("p_cube_w")) m.p_cube = j.at("p_cube_w").get<double>();
    if (j.contains("p_link_w")) m.p_link = j.at("p_link_w").get<double>();
    if (j.contains("t_step_img_ms"))
      m.t_step_img = j.at("t_step_img_ms").get<double>() * 1e-3;
    if (j.contains("t_powercycle_ms"))
      m.t_powercycle = j.at("t_powercycle_ms").get<double>() * 1e-3;
  } catch (const json::exception& e) {
    throw ntx::ConfigError(std::string("mesh config: ") + e.what());
  }
  m.validate();
  return m;
}

int cmd_mesh(const std::string& cfg, int side_max,
             const std::string& out_path) {
  ntx::MeshConfig m;
  if (!cfg.empty()) m = parse_mesh(slurp(resolve_config(cfg, "mesh")));
  if (side_max < 1) throw ntx::ConfigError("side bound must be >= 1");
  std::vector<int> sides(side_max);
  for (int i = 0; i < side_max; ++i) sides[i] = i + 1;
  const std::vector<std::int64_t> batches = {256, 512, 1024, 2048, 4096, 8192};
  Sink sink;
  ntx::write_mesh_grid_csv(m, sides, batches, sink.open(out_path));
  return 0;
}

int cmd_datacenter(const std::string& scenario, const std::string& cube_name,
                   const std::string& baseline_path, double budget,
                   const std::string& out_path) {
  ntx::ServerBaseline b;
  try {
    if (!baseline_path.empty()) {
      const json j = json::parse(slurp(baseline_path));
      b.total_w = j.value("total_w", b.total_w);
      b.gpu_w = j.value("gpu_w", b.gpu_w);
      b.gpu_peak_tflops = j.value("gpu_peak_tflops", b.gpu_peak_tflops);
      b.dram_gb = j.value("dram_gb", b.dram_gb);
      b.dram_w_per_16gb = j.value("dram_w_per_16gb", b.dram_w_per_16gb);
      b.dram_savings_w = j.value("dram_savings_w", b.dram_savings_w);
      b.pue_factor = j.value("pue_factor", b.pue_factor);
      b.price_per_kwh = j.value("price_per_kwh", b.price_per_kwh);
    }
  } catch (const json::exception& e) {
    throw ntx::ConfigError(std::string("baseline config: ") + e.what());
  }
  ntx::CubeOffer c;
  std::string cube_label = cube_name;
  try {
    const json j = json::parse(slurp(resolve_config(cube_name, "datacenter")));
    cube_label = j.value("name", cube_name);
    c.peak_tflops = j.at("peak_tflops").get<double>();
    const json& pw = j.at("power_w");
    c.power_w = pw.is_object() ? pw.at(scenario).get<double>()
                               : pw.get<double>();
    c.dram_gb = j.value("dram_gb", c.dram_gb);
  } catch (const json::exception& e) {
    throw ntx::ConfigError(std::string("cube config: ") + e.what());
  }

  json out;
  out["scenario"] = scenario;
  out["cube"] = {{"name", cube_label},
                 {"peak_tflops", c.peak_tflops},
                 {"power_w", c.power_w},
                 {"dram_gb", c.dram_gb}};
  if (scenario == "same-compute") {
    const auto r = ntx::same_compute(b, c);
    out["cubes"] = r.cubes;
    out["cube_power_w"] = r.cube_power_w;
    out["saved_w"] = r.saved_w;
    out["reduction"] = r.reduction;
    out["usd_per_year"] = r.usd_per_year;
  } else {
    if (budget <= 0.0) budget = b.gpu_w;
    const auto r = ntx::same_tdp(b, c, budget);
    out["budget_w"] = budget;
    out["cubes"] = r.cubes;
    out["total_tflops"] = r.total_tflops;
    out["ratio"] = r.ratio;
  }
  Sink sink;
  sink.open(out_path) << out.dump(2) << '\n';
  return 0;
}

int cmd_trace(int tiles, bool timeline, const std::string& prefix) {
  const auto rct = ntx::make_reference_conv_tiling(tiles);
  std::vector<std::byte> dram(rct.dram_bytes);
  ntx::ClusterOptions opt;
  opt.keep_timeline = timeline;
  const auto tr = ntx::run_tile_schedule(rct.schedule, dram, opt);

  const std::string bursts_path = prefix + "-bursts.csv";
  {
    std::ofstream f(bursts_path);
    if (!f) throw ntx::ConfigError("cannot write " + bursts_path);
    ntx::write_burst_histogram_csv(tr, f);
  }
  json files = json::array({bursts_path});
  if (timeline) {
    const std::string tl_path = prefix + "-timeline.csv";
    std::ofstream f(tl_path);
    if (!f) throw ntx::ConfigError("cannot write " + tl_path);
    ntx::write_trace_csv(tr, f);
    files.push_back(tl_path);
  }

  std::int64_t total = 0, big = 0;
  for (const auto bytes : tr.bursts) {
    total += bytes;
    if (bytes >= 32) big += bytes;
  }
  json j;
  j["tiles"] = tiles;
  j["cycles"] = tr.cycles;
  j["service_fraction"] = tr.service_fraction();
  json busy = json::object();
  for (std::size_t i = 0; i < tr.unit_names.size(); ++i)
    busy[tr.unit_names[i]] = tr.busy_fraction(i);
  j["busy_fraction"] = busy;
  j["burst_rows"] = std::int64_t(tr.bursts.size());
  j["burst_bytes_total"] = total;
  j["burst_bytes_ge_32B_fraction"] = total ? double(big) / total : 1.0;
  j["files"] = files;
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ntxsim: functional and analytical model of a near-memory "
               "DNN training accelerator"};
  app.require_subcommand(1);
  int rc = 0;

  std::uint64_t seed = 12345;
  int cases = 210;
  std::string fault, vformat = "text", vout;
  auto* verify = app.add_subcommand(
      "verify", "Run the randomized self-check suites");
  verify->add_option("--seed", seed, "Generator seed (NTXSIM_SEED overrides)");
  verify->add_option("--cases", cases, "Randomized case budget");
  verify->add_option("--format", vformat, "text or json")
      ->check(CLI::IsMember({"text", "json"}));
  verify->add_option("-o,--output", vout, "Write the report to a file");
  verify->add_option("--inject-fault", fault,
                     "Corrupt a suite on purpose (test hook)")
      ->check(CLI::IsMember(
          {"oracle", "gradient", "decomposition", "accumulator"}))
      ->group("");
  verify->callback([&] {
    if (const char* env = std::getenv("NTXSIM_SEED")) {
      char* end = nullptr;
      const unsigned long long v = std::strtoull(env, &end, 10);
      if (*env == '\0' || end == nullptr || *end != '\0')
        throw ntx::ConfigError("NTXSIM_SEED must be an unsigned integer");
      seed = v;
    }
    rc = cmd_verify(seed, cases, fault, vformat, vout);
  });

  std::string network, march = "ntx64-28nm", mformat = "csv", mout;
  bool train = false, golden = false;
  auto* model = app.add_subcommand(
      "model", "Per-layer time/bandwidth/power/efficiency table");
  model->add_option("--network", network, "Network name or JSON file")
      ->required();
  model->add_option("--arch", march, "Architecture name or JSON file");
  model->add_flag("--train", train, "Model a training step (default: inference)");
  model->add_flag("--golden", golden, "Compare totals against published rows");
  model->add_option("--format", mformat, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  model->add_option("-o,--output", mout, "Write the table to a file");
  model->callback(
      [&] { rc = cmd_model(network, march, train, golden, mformat, mout); });

  std::string oformat = "csv", oout;
  auto* off = app.add_subcommand(
      "offloads", "Controller offload counts: streaming vs nested loops");
  off->add_option("--format", oformat, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  off->add_option("-o,--output", oout, "Write the table to a file");
  off->callback([&] { rc = cmd_offloads(oformat, oout); });

  std::string sarch = "ntx64-28nm", sout;
  double step_ghz = 0.01, budget_w = 25.0;
  auto* sweep = app.add_subcommand(
      "sweep", "Voltage-frequency sweep of the calibration workload");
  sweep->add_option("--arch", sarch, "Architecture name or JSON file");
  sweep->add_option("--step-ghz", step_ghz, "Frequency grid step");
  sweep->add_option("--budget-w", budget_w, "Power budget for the optimum");
  sweep->add_option("-o,--output", sout, "Write the CSV to a file");
  sweep->callback([&] { rc = cmd_sweep(sarch, step_ghz, budget_w, sout); });

  std::string mesh_cfg, mesh_out;
  int side_max = 16;
  auto* mesh = app.add_subcommand(
      "mesh", "Data-parallel scaling grid over mesh size and batch");
  mesh->add_option("--config", mesh_cfg, "Mesh config name or JSON file");
  mesh->add_option("--side-max", side_max, "Mesh sides 1..N");
  mesh->add_option("-o,--output", mesh_out, "Write the CSV to a file");
  mesh->callback([&] { rc = cmd_mesh(mesh_cfg, side_max, mesh_out); });

  std::string scenario, cube = "ntx128-14nm", baseline, dout;
  double dbudget = 0.0;
  auto* dc = app.add_subcommand(
      "datacenter", "Server-replacement arithmetic for a cube offer");
  dc->add_option("--scenario", scenario, "same-compute or same-tdp")
      ->required()
      ->check(CLI::IsMember({"same-compute", "same-tdp"}));
  dc->add_option("--cube-config", cube, "Cube offer name or JSON file");
  dc->add_option("--baseline", baseline, "Server baseline JSON file");
  dc->add_option("--budget-w", dbudget,
                 "Thermal budget (default: the accelerator share)");
  dc->add_option("-o,--output", dout, "Write the report to a file");
  dc->callback(
      [&] { rc = cmd_datacenter(scenario, cube, baseline, dbudget, dout); });

  int tiles = 3;
  bool timeline = false;
  std::string prefix = "ntx-trace";
  auto* trace = app.add_subcommand(
      "trace", "Cycle-level cluster run of the reference conv tiling");
  trace->add_option("--tiles", tiles, "Double-buffered tile count")
      ->check(CLI::PositiveNumber);
  trace->add_flag("--timeline", timeline, "Also write the per-cycle state");
  trace->add_option("-o,--output-prefix", prefix, "CSV path prefix");
  trace->callback([&] { rc = cmd_trace(tiles, timeline, prefix); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ntx::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ntx::NetworkError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return rc;
}
