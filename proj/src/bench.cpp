#include "sfcb/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "sfcb/mesh_io.hpp"

#ifndef SFCB_VERSION
#define SFCB_VERSION "unknown"
#endif

namespace sfcb {

std::string code_version() { return SFCB_VERSION; }

void BenchConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  for (int d : dims)
    if (d < 1) fail("mesh dimensions must be positive");
  for (double e : extent)
    if (!(e > 0.0)) fail("box extent must be positive");
  if (degree < 0 || degree > kMaxDegree) fail("degree must lie in [0, " + std::to_string(kMaxDegree) + "]");
  if (n_var < 1) fail("n_var must be at least 1");
  if (n_ranks < 1 || n_ranks > 256) fail("ranks must lie in [1, 256]");
  if (steps < 1 && !(end_time > 0.0)) fail("need a positive step count or end time");
  if (dt < 0.0) fail("dt must not be negative");
  if (!(courant > 0.0)) fail("Courant number must be positive");
  if (!(balance.threshold > 1.0)) fail("imbalance threshold must exceed 1");
  if (balance.interval < 1) fail("measurement interval must be at least 1");
  if (!(balance.ema_weight > 0.0 && balance.ema_weight <= 1.0)) fail("EMA weight must lie in (0, 1]");
  if (balance.fixed_cost_s < 0.0) fail("rebalance cost must not be negative");
  if (repetitions < 1) fail("repetitions must be at least 1");
  LserkScheme::by_name(scheme);
}

BenchConfig preset(const std::string& scenario) {
  BenchConfig c;
  c.scenario = scenario;
  if (scenario == "hex-box") return c;
  if (scenario == "mixed-box") {
    c.mixed = true;
    c.n_ranks = 8;
    return c;
  }
  if (scenario == "advect-scaling") {
    c.uniform_initial = true;
    c.steps = 10;
    c.balance.enabled = false;
    return c;
  }
  throw ConfigError("unknown scenario '" + scenario + "' (expected hex-box, mixed-box or advect-scaling)");
}

nlohmann::json to_json(const BenchConfig& c) {
  nlohmann::json j;
  j["scenario"] = c.scenario;
  j["dims"] = c.dims;
  j["extent"] = c.extent;
  j["mixed"] = c.mixed;
  j["degree"] = c.degree;
  j["n_var"] = c.n_var;
  j["velocity"] = c.velocity;
  j["uniform_initial"] = c.uniform_initial;
  j["ranks"] = c.n_ranks;
  j["steps"] = c.steps;
  j["end_time"] = c.end_time;
  j["dt"] = c.dt;
  j["courant"] = c.courant;
  j["scheme"] = c.scheme;
  j["balance"] = {{"enabled", c.balance.enabled},
                  {"threshold", c.balance.threshold},
                  {"interval", c.balance.interval},
                  {"ema_weight", c.balance.ema_weight},
                  {"mode", c.balance.mode == PartitionMode::Exact ? "exact" : "greedy"},
                  {"fixed_cost_s", c.balance.fixed_cost_s}};
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["socket_transport"] = c.socket_transport;
  j["clock"] = c.clock == ClockKind::Monotonic ? "monotonic" : "thread_cpu";
  j["repetitions"] = c.repetitions;
  return j;
}

BenchConfig config_from_json(const nlohmann::json& j, BenchConfig c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "scenario") c.scenario = v.get<std::string>();
      else if (key == "dims") c.dims = v.get<std::array<int, 3>>();
      else if (key == "extent") c.extent = v.get<std::array<double, 3>>();
      else if (key == "mixed") c.mixed = v.get<bool>();
      else if (key == "degree") c.degree = v.get<int>();
      else if (key == "n_var") c.n_var = v.get<int>();
      else if (key == "velocity") c.velocity = v.get<std::array<double, 3>>();
      else if (key == "uniform_initial") c.uniform_initial = v.get<bool>();
      else if (key == "ranks") c.n_ranks = v.get<int>();
      else if (key == "steps") c.steps = v.get<long>();
      else if (key == "end_time") c.end_time = v.get<double>();
      else if (key == "dt") c.dt = v.get<double>();
      else if (key == "courant") c.courant = v.get<double>();
      else if (key == "scheme") c.scheme = v.get<std::string>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "out_dir") c.out_dir = v.get<std::string>();
      else if (key == "socket_transport") c.socket_transport = v.get<bool>();
      else if (key == "repetitions") c.repetitions = v.get<int>();
      else if (key == "clock") {
        const auto s = v.get<std::string>();
        if (s == "thread_cpu") c.clock = ClockKind::ThreadCpu;
        else if (s == "monotonic") c.clock = ClockKind::Monotonic;
        else throw ConfigError("clock must be thread_cpu or monotonic");
      } else if (key == "balance") {
        if (!v.is_object()) throw ConfigError("balance must be an object");
        for (const auto& [bk, bv] : v.items()) {
          if (bk == "enabled") c.balance.enabled = bv.get<bool>();
          else if (bk == "threshold") c.balance.threshold = bv.get<double>();
          else if (bk == "interval") c.balance.interval = bv.get<int>();
          else if (bk == "ema_weight") c.balance.ema_weight = bv.get<double>();
          else if (bk == "fixed_cost_s") c.balance.fixed_cost_s = bv.get<double>();
          else if (bk == "mode") {
            const auto s = bv.get<std::string>();
            if (s == "greedy") c.balance.mode = PartitionMode::Greedy;
            else if (s == "exact") c.balance.mode = PartitionMode::Exact;
            else throw ConfigError("balance.mode must be greedy or exact");
          } else {
            throw ConfigError("unknown balance key '" + bk + "'");
          }
        }
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return c;
}

Mesh build_mesh(const BenchConfig& c) {
  Box box;
  box.hi = Vec3(c.extent[0], c.extent[1], c.extent[2]);
  Mesh m = generate_box_mesh(c.dims[0], c.dims[1], c.dims[2], box);
  if (c.mixed) m = split_to_mixed(m, quarter_assignment(m));
  return m;
}

std::uint64_t state_checksum(const std::vector<double>& state) {
  return fnv1a64({reinterpret_cast<const std::uint8_t*>(state.data()), state.size() * sizeof(double)});
}

namespace {

std::function<double(const Vec3&, int)> initial_condition(const BenchConfig& c) {
  if (c.uniform_initial) return [](const Vec3&, int) { return 1.0; };
  // A few smooth periodic waves drawn from the seed.
  struct Wave {
    Vec3 k;
    double amp, phase;
  };
  std::mt19937_64 rng(c.seed);
  std::vector<std::vector<Wave>> waves(static_cast<std::size_t>(c.n_var));
  for (auto& per_var : waves)
    for (int m = 0; m < 3; ++m) {
      Wave w;
      for (int d = 0; d < 3; ++d) w.k[d] = static_cast<double>(rng() % 3) / c.extent[static_cast<std::size_t>(d)];
      w.amp = 0.5 / (m + 1);
      w.phase = static_cast<double>(rng() % 1000) * 2e-3 * std::numbers::pi;
      per_var.push_back(w);
    }
  return [waves](const Vec3& x, int v) {
    double u = 1.0;
    for (const auto& w : waves[static_cast<std::size_t>(v)])
      u += w.amp * std::sin(2.0 * std::numbers::pi * w.k.dot(x) + w.phase);
    return u;
  };
}

std::string counts_string(const std::array<std::size_t, 4>& n) {
  std::ostringstream s;
  bool first = true;
  for (auto t : kAllElementTypes) {
    if (n[static_cast<int>(t)] == 0) continue;
    s << (first ? "" : ";") << to_string(t) << ':' << n[static_cast<int>(t)];
    first = false;
  }
  return s.str();
}

struct RankOutput {
  std::vector<TracePoint> trace;
  std::vector<BalanceEvent> events;
  std::vector<PartitionOffsets> partitions;
  std::vector<double> state;
  double loop_time = 0.0;
  double cost_hex = 0.0, cost_modal = 0.0;
  std::size_t samples_hex = 0, samples_modal = 0;
};

std::vector<double> pack_slots(const LocalSolver& s, std::size_t slot) {
  std::vector<double> data(s.n_local() * slot, 0.0);
  for (std::size_t l = 0; l < s.n_local(); ++l) {
    const auto& q = s.states()[l].q_nodal;
    std::copy_n(q.data(), q.size(), data.begin() + static_cast<std::ptrdiff_t>(l * slot));
  }
  return data;
}

std::vector<Eigen::MatrixXd> unpack_slots(const Discretization& disc, const LocalSolver& s,
                                          const std::vector<double>& data, std::size_t slot) {
  std::vector<Eigen::MatrixXd> q(s.n_local());
  for (std::size_t l = 0; l < s.n_local(); ++l) {
    const auto& b = disc.basis_of(static_cast<std::size_t>(s.states()[l].owner));
    q[l] = Eigen::Map<const Eigen::MatrixXd>(data.data() + l * slot, b.n_nodes, disc.n_var());
  }
  return q;
}

RankOutput run_rank(Communicator& comm, const BenchConfig& c, const Discretization& disc, const LserkScheme& scheme,
                    double dt, long steps, double bandwidth) {
  const int n_ranks = comm.size(), rank = comm.rank();
  const auto n_elems = static_cast<std::int64_t>(disc.n_elements());
  const std::size_t slot = disc.slot_size();
  const auto& elements = disc.mesh().elements;
  AmortizationModel model;
  model.bandwidth_bytes_per_s = bandwidth;
  model.fixed_cost_s = c.balance.fixed_cost_s;

  RankOutput out;
  PartitionOffsets offsets = uniform_partition(n_elems, n_ranks);
  out.partitions.push_back(offsets);
  auto solver = std::make_unique<LocalSolver>(disc, offsets, rank, &comm.p2p());
  solver->set_initial(initial_condition(c));
  CostSmoother ema(c.balance.ema_weight);

  for (long step = 0; step < steps; ++step) {
    const bool measure = (step + 1) % c.balance.interval == 0;
    try {
      const double t0 = clock_seconds(c.clock);
      const TimerSet timers = solver->advance_timestep(scheme, dt, measure, step, c.clock);
      if (measure) {
        const auto local = attribute_costs(timers, solver->modal_flags(), solver->side_to_elem());
        const auto global = comm.all_gather_vector<double>(local);
        for (std::size_t e = 0; e < global.size(); ++e) {
          if (is_modal(elements[e].type)) {
            out.cost_modal += global[e];
            ++out.samples_modal;
          } else {
            out.cost_hex += global[e];
            ++out.samples_hex;
          }
        }
        out.trace.push_back({step + 1, compute_imbalance(global, offsets), segment_loads(global, offsets)});
        const auto& w = ema.update(global);
        const double imbalance = compute_imbalance(w, offsets);
        if (c.balance.enabled && should_rebalance(imbalance, c.balance.threshold)) {
          const auto fresh = repartition_sfc(w, n_ranks, c.balance.mode);
          BalanceEvent ev;
          ev.step = step + 1;
          ev.imbalance_before = imbalance;
          ev.imbalance_after = compute_imbalance(w, fresh);
          for (int r = 0; r < n_ranks; ++r) {
            const auto plan = build_exchange_plan(offsets, fresh, r);
            ev.elements_moved += plan.total_send() - plan.n_send[static_cast<std::size_t>(r)];
          }
          ev.bytes_moved = ev.elements_moved * static_cast<std::int64_t>(slot * sizeof(double));
          const auto old_loads = segment_loads(w, offsets), new_loads = segment_loads(w, fresh);
          const double gain =
              projected_gain(*std::max_element(old_loads.begin(), old_loads.end()),
                             *std::max_element(new_loads.begin(), new_loads.end()), steps - step - 1,
                             model.exchange_cost(static_cast<double>(ev.bytes_moved)));
          // Replicated decision: every rank holds the same weights.
          ev.executed = ev.imbalance_after < ev.imbalance_before && gain > 0.0;
          if (ev.executed) {
            auto data = pack_slots(*solver, slot);
            execute_exchange(comm, build_exchange_plan(offsets, fresh, rank), offsets, fresh, data, slot);
            offsets = fresh;
            solver = std::make_unique<LocalSolver>(disc, offsets, rank, &comm.p2p());
            solver->load_nodal(unpack_slots(disc, *solver, data, slot));
            out.partitions.push_back(offsets);
          }
          out.events.push_back(ev);
        }
      }
      out.loop_time += clock_seconds(c.clock) - t0;
    } catch (const CollectiveError& e) {
      throw CollectiveError(std::string(e.what()) + " (step " + std::to_string(step) + ")");
    } catch (const TopologyError& e) {
      throw TopologyError(std::string(e.what()) + " (step " + std::to_string(step) + ")");
    } catch (const ExchangeError& e) {
      throw ExchangeError(std::string(e.what()) + " (step " + std::to_string(step) + ")");
    }
  }

  std::vector<double> local;
  for (const auto& st : solver->states()) local.insert(local.end(), st.q_nodal.data(), st.q_nodal.data() + st.q_nodal.size());
  auto global = comm.all_gather_vector<double>(local);
  if (rank == 0) out.state = std::move(global);
  out.loop_time = comm.all_reduce_max(out.loop_time);
  return out;
}

}  // namespace

ScenarioResult run_scenario(const BenchConfig& c, std::ostream* log) {
  c.validate();
  auto mesh = std::make_shared<const Mesh>(build_mesh(c));
  KernelConfig kc;
  kc.degree = c.degree;
  kc.n_var = c.n_var;
  kc.velocity = Vec3(c.velocity[0], c.velocity[1], c.velocity[2]);
  const Discretization disc(mesh, kc);
  const auto scheme = LserkScheme::by_name(c.scheme);

  double dt = c.dt > 0.0 ? c.dt : disc.cfl_time_step(c.courant);
  long steps = c.steps;
  if (c.end_time > 0.0) {
    steps = std::max(1L, static_cast<long>(std::ceil(c.end_time / dt - 1e-12)));
    dt = c.end_time / static_cast<double>(steps);
  }
  if (log) {
    *log << c.scenario << ": " << disc.n_elements() << " elements, N=" << c.degree << ", " << c.n_ranks
         << " ranks, dt=" << dt << (c.dt > 0.0 ? " (fixed)" : " (CFL estimate, Courant " + std::to_string(c.courant) + ")")
         << ", " << steps << " steps\n";
  }
  const double bandwidth = AmortizationModel::calibrate_bandwidth();

  ClusterOptions opts;
  opts.socket_transport = c.socket_transport;
  std::vector<RankOutput> outs;
  try {
    outs = spawn_cluster<RankOutput>(
        c.n_ranks, [&](Communicator& comm) { return run_rank(comm, c, disc, scheme, dt, steps, bandwidth); }, opts);
  } catch (const ClusterError& e) {
    if (e.cause()) {
      try {
        std::rethrow_exception(e.cause());
      } catch (const DivergenceError&) {
        throw;
      } catch (const ConfigError&) {
        throw;
      } catch (...) {
      }
    }
    throw;
  }

  auto& o = outs.front();
  ScenarioResult r;
  r.dt = dt;
  r.counts = mesh->count_by_type();
  r.trace = std::move(o.trace);
  r.events = std::move(o.events);
  r.partitions = std::move(o.partitions);
  r.final_state = std::move(o.state);
  r.checksum = state_checksum(r.final_state);
  r.mean_cost_hex = o.samples_hex ? o.cost_hex / static_cast<double>(o.samples_hex) : 0.0;
  r.mean_cost_modal = o.samples_modal ? o.cost_modal / static_cast<double>(o.samples_modal) : 0.0;

  auto& rec = r.record;
  std::ostringstream id;
  id << c.scenario << "-r" << c.n_ranks << "-s" << c.seed;
  rec.run_id = id.str();
  rec.wall_clock_time = o.loop_time;
  rec.n_ranks = c.n_ranks;
  rec.n_dof = disc.n_dof();
  rec.n_time_steps = steps;
  rec.n_rk_stages = scheme.n_stages();
  rec.simulated_time = dt * static_cast<double>(steps);
  rec.n_elems_by_type = counts_string(r.counts);
  rec.degree = c.degree;
  if (!r.trace.empty()) {
    rec.imbalance_before = r.trace.front().imbalance;
    rec.imbalance_after = r.trace.back().imbalance;
  }
  rec.n_rebalances = static_cast<int>(std::count_if(r.events.begin(), r.events.end(), [](const auto& e) { return e.executed; }));
  return r;
}

std::vector<ScalingRow> run_scaling(const BenchConfig& c, const std::vector<int>& rank_counts, ScalingMode mode,
                                    std::vector<RunRecord>* records) {
  if (rank_counts.size() < 2) throw ConfigError("scaling needs at least two rank counts");
  const int base = rank_counts.front();
  std::vector<RunRecord> all;
  for (int ranks : rank_counts) {
    if (ranks < 1) throw ConfigError("rank counts must be positive");
    BenchConfig rc = c;
    rc.n_ranks = ranks;
    rc.out_dir.clear();
    if (mode == ScalingMode::Weak) {
      if (ranks % base != 0) throw ConfigError("weak scaling rank counts must be multiples of the first");
      rc.dims[0] = c.dims[0] * ranks / base;
      rc.extent[0] = c.extent[0] * ranks / base;
    }
    for (int rep = 0; rep < c.repetitions; ++rep) {
      auto res = run_scenario(rc);
      res.record.mode = mode == ScalingMode::Strong ? "strong" : "weak";
      res.record.run_id += "-rep" + std::to_string(rep);
      all.push_back(res.record);
    }
  }
  if (records) *records = all;
  return scaling_report(all, mode);
}

void write_outputs(const std::filesystem::path& dir, const BenchConfig& c, const ScenarioResult& r) {
  std::filesystem::create_directories(dir);
  {
    nlohmann::json j;
    j["config"] = to_json(c);
    j["version"] = code_version();
    std::ofstream(dir / "config.json") << j.dump(2) << '\n';
  }
  {
    std::ofstream f(dir / "metrics.csv");
    write_metrics_header(f);
    write_metrics_row(f, r.record);
  }
  {
    std::ofstream f(dir / "trace.csv");
    f << "step,imbalance";
    for (int k = 0; k < c.n_ranks; ++k) f << ",load_rank" << k;
    f << '\n' << std::setprecision(17);
    for (const auto& t : r.trace) {
      f << t.step << ',' << t.imbalance;
      for (double l : t.rank_loads) f << ',' << l;
      f << '\n';
    }
  }
  {
    std::ofstream f(dir / "balance_events.jsonl");
    for (const auto& e : r.events) write_balance_event(f, e);
  }
  {
    std::ofstream f(dir / "checksum.txt");
    f << std::hex << std::setw(16) << std::setfill('0') << r.checksum << '\n';
  }
}

}  // namespace sfcb
