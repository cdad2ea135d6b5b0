// bench: scenario runner, scaling harness and mesh utility.
//
// Exit codes: 0 success, 2 configuration or input error, 3 divergence,
// 4 cluster error, 1 anything else.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "sfcb/bench.hpp"
#include "sfcb/mesh_io.hpp"

using namespace sfcb;

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kDiverged = 3, kCluster = 4 };

std::vector<int> parse_int_list(const std::string& s, std::size_t expected = 0) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("not an integer list: '" + s + "'");
    }
  }
  if (out.empty() || (expected && out.size() != expected)) throw ConfigError("bad list: '" + s + "'");
  return out;
}

std::vector<double> parse_double_list(const std::string& s, std::size_t expected) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("not a number list: '" + s + "'");
    }
  }
  if (out.size() != expected) throw ConfigError("expected " + std::to_string(expected) + " values in '" + s + "'");
  return out;
}

BenchConfig load_config(const std::string& scenario, const std::string& path, std::string* raw) {
  BenchConfig c = preset(scenario);
  if (path.empty()) return c;
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  if (raw) *raw = buf.str();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  return config_from_json(j, c);
}

struct RunOptions {
  std::string scenario, config, out, balance, clock;
  int ranks = 0, interval = 0, degree = -1;
  long steps = 0;
  double threshold = 0.0, courant = 0.0, dt = -1.0, end_time = -1.0;
  std::uint64_t seed = 0;
  bool sockets = false, exact = false;
};

void apply(const RunOptions& o, BenchConfig& c) {
  if (o.ranks) c.n_ranks = o.ranks;
  if (o.interval) c.balance.interval = o.interval;
  if (o.degree >= 0) c.degree = o.degree;
  if (o.steps) c.steps = o.steps;
  if (o.threshold > 0.0) c.balance.threshold = o.threshold;
  if (o.courant > 0.0) c.courant = o.courant;
  if (o.dt >= 0.0) c.dt = o.dt;
  if (o.end_time >= 0.0) c.end_time = o.end_time;
  if (o.seed) c.seed = o.seed;
  if (!o.out.empty()) c.out_dir = o.out;
  if (o.sockets) c.socket_transport = true;
  if (o.exact) c.balance.mode = PartitionMode::Exact;
  if (o.balance == "on") c.balance.enabled = true;
  if (o.balance == "off") c.balance.enabled = false;
  if (o.clock == "monotonic") c.clock = ClockKind::Monotonic;
  if (o.clock == "thread_cpu") c.clock = ClockKind::ThreadCpu;
}

void add_run_options(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("--config", o.config, "JSON config file (overrides the preset)");
  cmd->add_option("--ranks", o.ranks, "simulated ranks")->check(CLI::PositiveNumber);
  cmd->add_option("--threshold", o.threshold, "rebalance when imbalance exceeds this");
  cmd->add_option("--balance", o.balance, "load balancing")->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--interval", o.interval, "measure every K-th step")->check(CLI::PositiveNumber);
  cmd->add_option("--steps", o.steps, "time steps")->check(CLI::PositiveNumber);
  cmd->add_option("--degree", o.degree, "polynomial degree N");
  cmd->add_option("--courant", o.courant, "Courant number for the CFL time step");
  cmd->add_option("--dt", o.dt, "fixed time step (0 = CFL estimate)");
  cmd->add_option("--end-time", o.end_time, "simulated end time (overrides --steps)");
  cmd->add_option("--seed", o.seed, "initial-condition seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--clock", o.clock, "timer clock")->check(CLI::IsMember({"thread_cpu", "monotonic"}));
  cmd->add_flag("--sockets", o.sockets, "route halo traffic over local sockets");
  cmd->add_flag("--exact-partition", o.exact, "optimal partitioner instead of the greedy one");
}

int cmd_run(const RunOptions& o) {
  std::string raw;
  BenchConfig c = load_config(o.scenario, o.config, &raw);
  apply(o, c);
  c.validate();
  const auto r = run_scenario(c, &std::cout);
  std::cout << "checksum " << std::hex << r.checksum << std::dec << '\n';
  std::cout << "wall " << r.record.wall_clock_time << " s, PID " << compute_pid(r.record) << " s, efficiency "
            << compute_efficiency(r.record) << " s/CPU-h\n";
  std::cout << "imbalance first " << r.record.imbalance_before << ", last " << r.record.imbalance_after << ", "
            << r.record.n_rebalances << " rebalances\n";
  for (const auto& e : r.events) {
    std::cout << "  step " << e.step << ": " << e.imbalance_before << " -> " << e.imbalance_after << ", moved "
              << e.elements_moved << (e.executed ? "" : " (skipped)") << '\n';
  }
  if (!c.out_dir.empty()) {
    write_outputs(c.out_dir, c, r);
    if (!raw.empty()) std::ofstream(std::filesystem::path(c.out_dir) / "config.input.json") << raw;
    std::cout << "outputs in " << c.out_dir << '\n';
  }
  return kOk;
}

int cmd_scaling(const RunOptions& o, const std::string& mode_name, const std::string& ranks, int reps) {
  std::string raw;
  BenchConfig c = load_config(o.scenario, o.config, &raw);
  apply(o, c);
  if (reps) c.repetitions = reps;
  c.out_dir.clear();
  c.validate();
  const auto mode = mode_name == "weak" ? ScalingMode::Weak : ScalingMode::Strong;
  std::vector<RunRecord> records;
  const auto rows = run_scaling(c, parse_int_list(ranks), mode, &records);
  write_scaling_csv(std::cout, rows, mode);
  if (!o.out.empty()) {
    std::filesystem::create_directories(o.out);
    nlohmann::json j;
    j["config"] = to_json(c);
    j["version"] = code_version();
    j["mode"] = mode_name;
    j["ranks"] = ranks;
    std::ofstream(std::filesystem::path(o.out) / "config.json") << j.dump(2) << '\n';
    if (!raw.empty()) std::ofstream(std::filesystem::path(o.out) / "config.input.json") << raw;
    std::ofstream m(std::filesystem::path(o.out) / "metrics.csv");
    write_metrics_header(m);
    for (const auto& r : records) write_metrics_row(m, r);
    std::ofstream s(std::filesystem::path(o.out) / "scaling.csv");
    write_scaling_csv(s, rows, mode);
  }
  return kOk;
}

void print_info(const Mesh& m) {
  const auto n = m.count_by_type();
  std::cout << "elements " << m.n_elements() << " (hex " << n[0] << ", tet " << n[1] << ", prism " << n[2]
            << ", pyramid " << n[3] << ")\n";
  std::cout << "nodes " << m.nodes.size() << ", sides " << m.sides.size() << ", periodic " << (m.periodic ? "yes" : "no")
            << ", sfc level " << m.sfc_level << '\n';
  std::cout << "box [" << m.box.lo.transpose() << "] - [" << m.box.hi.transpose() << "]\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SFC load-balancing benchmark for mixed-element DG"};
  app.require_subcommand(1);

  RunOptions run_opts;
  auto* run = app.add_subcommand("run", "run one scenario");
  run->add_option("scenario", run_opts.scenario, "hex-box | mixed-box | advect-scaling")->required();
  add_run_options(run, run_opts);

  RunOptions sc_opts;
  sc_opts.scenario = "advect-scaling";
  std::string mode = "strong", ranks = "1,2,4";
  auto* scaling = app.add_subcommand("scaling", "strong or weak scaling series");
  scaling->add_option("--mode", mode, "strong | weak")->check(CLI::IsMember({"strong", "weak"}));
  scaling->add_option("--rank-counts,--ranks", ranks, "comma separated rank counts");
  scaling->add_option("--scenario", sc_opts.scenario, "base scenario");
  int reps = 0;
  scaling->add_option("--repetitions", reps, "runs per rank count")->check(CLI::PositiveNumber);
  scaling->add_option("--config", sc_opts.config, "JSON config file");
  scaling->add_option("--steps", sc_opts.steps, "time steps")->check(CLI::PositiveNumber);
  scaling->add_option("--degree", sc_opts.degree, "polynomial degree N");
  scaling->add_option("--balance", sc_opts.balance, "load balancing")->check(CLI::IsMember({"on", "off"}));
  scaling->add_option("--out", sc_opts.out, "output directory");

  auto* mesh = app.add_subcommand("mesh", "mesh utilities");
  mesh->require_subcommand(1);
  std::string dims = "8,8,8", extent = "1,1,1", out, in, mix = "1,1,1", preset_name;
  double fraction = -1.0;
  bool sidecar = false;
  auto* gen = mesh->add_subcommand("gen", "periodic hexahedral box");
  gen->add_option("--dims", dims, "nx,ny,nz");
  gen->add_option("--extent", extent, "box lengths");
  gen->add_option("--out", out, "mesh file")->required();
  gen->add_flag("--sidecar", sidecar, "also write a JSON summary");
  auto* split = mesh->add_subcommand("split", "split hexes into tets, pyramids and prisms");
  split->add_option("--in", in, "input mesh")->required();
  split->add_option("--out", out, "output mesh")->required();
  split->add_option("--preset", preset_name, "quarter layout: one element type per quarter of the cross-section")->check(CLI::IsMember({"paper-tgv-mixed"}));
  split->add_option("--fraction", fraction, "fraction of hexes to split");
  split->add_option("--mix", mix, "tets,pyramids,prisms weights");
  split->add_flag("--sidecar", sidecar, "also write a JSON summary");
  auto* info = mesh->add_subcommand("info", "summarize a mesh file");
  info->add_option("file", in, "mesh file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*run) return cmd_run(run_opts);
    if (*scaling) return cmd_scaling(sc_opts, mode, ranks, reps);
    if (*gen) {
      const auto d = parse_int_list(dims, 3);
      const auto e = parse_double_list(extent, 3);
      Box box;
      box.hi = Vec3(e[0], e[1], e[2]);
      const Mesh m = generate_box_mesh(d[0], d[1], d[2], box);
      write_mesh(m, out);
      if (sidecar) write_mesh_sidecar(m, out + ".json");
      print_info(m);
      return kOk;
    }
    if (*split) {
      const Mesh base = read_mesh(in);
      Mesh m;
      if (!preset_name.empty()) {
        m = split_to_mixed(base, quarter_assignment(base));
      } else {
        if (fraction < 0.0 || fraction > 1.0) throw ConfigError("--fraction in [0, 1] or --preset is required");
        const auto w = parse_double_list(mix, 3);
        m = split_to_mixed(base, fraction, TemplateMix{w[0], w[1], w[2]});
      }
      write_mesh(m, out);
      if (sidecar) write_mesh_sidecar(m, out + ".json");
      print_info(m);
      return kOk;
    }
    if (*info) {
      print_info(read_mesh(in));
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kConfig;
  } catch (const MeshError& e) {
    std::cerr << "mesh error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kDiverged;
  } catch (const ClusterError& e) {
    std::cerr << "cluster error: " << e.what() << '\n';
    return kCluster;
  } catch (const CollectiveError& e) {
    std::cerr << "cluster error: " << e.what() << '\n';
    return kCluster;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kOther;
}
