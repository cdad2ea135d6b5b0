// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "sfcb/balance.hpp"
#include "sfcb/bench.hpp"
#include "sfcb/cluster.hpp"
#include "sfcb/kernel.hpp"
#include "sfcb/metrics.hpp"
#include "sfcb/sfc.hpp"
#include "sfcb/timing.hpp"

using namespace sfcb;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 3) {
  std::ostringstream s;
  s << std::setprecision(prec) << v;
  return s.str();
}

// ---------------------------------------------------------------------------

Outcome sfc_properties() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  for (int level = 1; level <= 4; ++level) {
    const std::uint32_t side = 1u << level;
    const std::uint64_t cells = std::uint64_t{side} * side * side;
    std::vector<char> seen(cells, 0);
    for (std::uint32_t i = 0; i < side; ++i)
      for (std::uint32_t j = 0; j < side; ++j)
        for (std::uint32_t k = 0; k < side; ++k) {
          const sfc::GridCoord g{i, j, k, level};
          const auto h = sfc::hilbert_encode(g).value;
          if (h >= cells || seen[h] || !(sfc::hilbert_decode({h}, level) == g)) ok = false;
          if (h < cells) seen[h] = 1;
        }
    for (std::uint64_t h = 0; h + 1 < cells; ++h) {
      const auto a = sfc::hilbert_decode({h}, level), b = sfc::hilbert_decode({h + 1}, level);
      const auto d = [](std::uint32_t x, std::uint32_t y) { return x > y ? x - y : y - x; };
      if (d(a.i, b.i) + d(a.j, b.j) + d(a.k, b.k) != 1) ok = false;
    }
  }
  const double t = seconds_since(t0);
  return {ok && t < 5.0, "levels 1-4 exhaustive, " + fmt(t) + " s"};
}

// ---------------------------------------------------------------------------

// Summed element by element so it does not share code with the partitioner.
double bottleneck(const std::vector<double>& w, const PartitionOffsets& o) {
  double worst = 0.0;
  for (std::size_t r = 0; r + 1 < o.size(); ++r) {
    double s = 0.0;
    for (auto i = o[r]; i < o[r + 1]; ++i) s += w[static_cast<std::size_t>(i)];
    worst = std::max(worst, s);
  }
  return worst;
}

double brute_force_bottleneck(const std::vector<double>& w, int k) {
  const auto n = static_cast<std::int64_t>(w.size());
  PartitionOffsets o(static_cast<std::size_t>(k) + 1, 0);
  o[static_cast<std::size_t>(k)] = n;
  double best = std::numeric_limits<double>::infinity();
  std::function<void(int, std::int64_t)> rec = [&](int r, std::int64_t from) {
    if (r == k) {
      best = std::min(best, bottleneck(w, o));
      return;
    }
    for (std::int64_t c = from; c <= n; ++c) {
      o[static_cast<std::size_t>(r)] = c;
      rec(r + 1, c);
    }
  };
  rec(1, 0);
  return best;
}

Outcome partition_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  int exact_mismatch = 0, greedy_over = 0;
  double worst_greedy = 1.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    std::mt19937_64 rng(seed);
    const int n = 1 + static_cast<int>(rng() % 12);
    const int k = 1 + static_cast<int>(rng() % 4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> w(static_cast<std::size_t>(n));
    for (auto& x : w) x = u(rng);
    const double opt = brute_force_bottleneck(w, k);
    const double ex = bottleneck(w, repartition_sfc(w, k, PartitionMode::Exact));
    const double gr = bottleneck(w, repartition_sfc(w, k, PartitionMode::Greedy));
    if (std::abs(ex - opt) > 1e-12 * opt) ++exact_mismatch;
    if (gr > 1.5 * opt) ++greedy_over;
    if (opt > 0) worst_greedy = std::max(worst_greedy, gr / opt);
  }
  const double t = seconds_since(t0);
  return {exact_mismatch == 0 && greedy_over == 0 && t < 30.0,
          "1000 seeds, exact mismatches " + std::to_string(exact_mismatch) + ", worst greedy/opt " +
              fmt(worst_greedy, 4) + ", " + fmt(t) + " s"};
}

// ---------------------------------------------------------------------------

Outcome exchange_bit_exact() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g;
  const std::size_t slot = 4;
  const std::int64_t n = 64;
  int failures = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + static_cast<int>(rng() % 7);
    std::vector<double> global(static_cast<std::size_t>(n) * slot);
    for (auto& x : global) x = g(rng);
    auto random_offsets = [&] {
      PartitionOffsets o(static_cast<std::size_t>(k) + 1, 0);
      for (int r = 1; r < k; ++r) o[static_cast<std::size_t>(r)] = static_cast<std::int64_t>(rng() % (n + 1));
      o[static_cast<std::size_t>(k)] = n;
      std::sort(o.begin(), o.end());
      return o;
    };
    const auto old = random_offsets(), fresh = random_offsets();
    auto slice = [&](const PartitionOffsets& o, int r) {
      return std::vector<double>(global.begin() + o[static_cast<std::size_t>(r)] * static_cast<std::ptrdiff_t>(slot),
                                 global.begin() + o[static_cast<std::size_t>(r) + 1] * static_cast<std::ptrdiff_t>(slot));
    };
    const auto got = spawn_cluster<std::vector<double>>(k, [&](Communicator& c) {
      auto data = slice(old, c.rank());
      execute_exchange(c, build_exchange_plan(old, fresh, c.rank()), old, fresh, data, slot);
      return data;
    });
    for (int r = 0; r < k; ++r) {
      const auto want = slice(fresh, r);
      const auto& have = got[static_cast<std::size_t>(r)];
      if (have.size() != want.size() || std::memcmp(have.data(), want.data(), want.size() * sizeof(double)) != 0) {
        ++failures;
        break;
      }
    }
  }
  return {failures == 0, "200 partition pairs, 2-8 ranks, " + std::to_string(failures) + " mismatches"};
}

// ---------------------------------------------------------------------------

TimerSet timers(double te, double ts, double tm, std::size_t ne, std::size_t ns, std::size_t nm) {
  TimerSet t;
  t[Category::DgElems] = te;
  t[Category::DgSides] = ts;
  t[Category::DgModal] = tm;
  t.n_elems = ne;
  t.n_sides = ns;
  t.n_modal_elems = nm;
  return t;
}

Outcome attribution_conservation() {
  const std::vector<std::size_t> s2e{0, 0, 1};
  bool hand = attribute_costs(timers(10, 0, 0, 5, 0, 0), std::vector<bool>(5, false), {}) ==
              std::vector<double>(5, 2.0);
  hand = hand && attribute_costs(timers(0, 6, 0, 2, 3, 0), {false, false}, s2e) == std::vector<double>{4.0, 2.0};
  hand = hand && attribute_costs(timers(10, 6, 4, 5, 3, 2), {true, false, false, true, false}, s2e) ==
                     std::vector<double>{8.0, 4.0, 2.0, 4.0, 2.0};

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t ne = 1 + rng() % 2000, ns = 1 + rng() % 6000;
    std::vector<bool> modal(ne);
    std::size_t nm = 0;
    for (std::size_t e = 0; e < ne; ++e) nm += (modal[e] = u(rng) < 0.5);
    std::vector<std::size_t> map(ns);
    for (auto& s : map) s = rng() % ne;
    const double te = u(rng) * 1e-2, ts = u(rng) * 1e-3, tm = nm ? u(rng) * 1e-2 : 0.0;
    const auto a = attribute_costs(timers(te, ts, tm, ne, ns, nm), modal, map);
    double sum = 0.0;
    for (double x : a) sum += x;
    worst = std::max(worst, std::abs(sum - (te + ts + tm)) / (te + ts + tm));
  }
  return {hand && worst <= 1e-12,
          std::string("hand fixtures ") + (hand ? "exact" : "MISMATCH") + ", worst relative error " + fmt(worst) +
              " over 2000 random fixtures"};
}

// ---------------------------------------------------------------------------

Outcome modal_stepping() {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  double roundtrip = 0.0;
  for (auto t : kAllElementTypes) {
    for (int n = 0; n <= 5; ++n) {
      const auto b = build_basis(t, n);
      Eigen::MatrixXd q(b.n_nodes, 3);
      for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = uni(rng);
      roundtrip = std::max(roundtrip, (modal_reconstruct(modal_project(q, b, 0.37), b) - q).cwiseAbs().maxCoeff());
    }
  }

  // Free stream and conservation on the mixed preset mesh at its default degree.
  const BenchConfig pc = preset("mixed-box");
  const auto mesh = std::make_shared<const Mesh>(build_mesh(pc));
  KernelConfig kc;
  kc.degree = pc.degree;
  Discretization d(mesh, kc);
  const double dt = d.cfl_time_step(pc.courant);
  const PartitionOffsets all{0, static_cast<std::int64_t>(d.n_elements())};

  LocalSolver fs(d, all, 0);
  fs.set_initial([](const Vec3&, int) { return 1.0; });
  for (int i = 0; i < 100; ++i) fs.advance_timestep(LserkScheme::ck45(), dt, false, i);
  double drift = 0.0;
  for (const auto& st : fs.states()) drift = std::max(drift, (st.q_nodal.array() - 1.0).abs().maxCoeff());

  LocalSolver adv(d, all, 0);
  adv.set_initial([](const Vec3& x, int) {
    const double k = 2 * std::numbers::pi;
    return std::sin(k * x[0]) * std::cos(k * x[1]) + 0.25 * std::sin(k * x[2]) + 0.5;
  });
  const double i0 = adv.integral()[0];
  for (int i = 0; i < 100; ++i) adv.advance_timestep(LserkScheme::ck45(), dt, false, i);
  const double mass = std::abs(adv.integral()[0] - i0);

  return {roundtrip <= 1e-10 && drift <= 1e-12 && mass <= 1e-10,
          "roundtrip " + fmt(roundtrip) + ", free-stream drift " + fmt(drift) + ", integral change " + fmt(mass) +
              " (" + std::to_string(d.n_elements()) + " elements, N=" + std::to_string(kc.degree) + ", 100 steps)"};
}

// ---------------------------------------------------------------------------

Outcome temporal_order() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto mesh = std::make_shared<const Mesh>(generate_box_mesh(4, 4, 4, Box{}));
  KernelConfig kc;
  kc.degree = 3;
  Discretization d(mesh, kc);
  const auto scheme = LserkScheme::ck45();
  const double t_end = 0.2;
  auto solve = [&](int steps) {
    LocalSolver s(d, {0, static_cast<std::int64_t>(d.n_elements())}, 0);
    s.set_initial([](const Vec3& x, int) {
      const double k = 2 * std::numbers::pi;
      return std::sin(k * x[0]) * std::sin(k * x[1]) * std::sin(k * x[2]);
    });
    for (int i = 0; i < steps; ++i) s.advance_timestep(scheme, t_end / steps, false, i);
    std::vector<double> out;
    for (const auto& st : s.states()) out.insert(out.end(), st.q_nodal.data(), st.q_nodal.data() + st.q_nodal.size());
    return out;
  };
  // Same spatial operator throughout; a much finer step serves as the reference.
  const int base = static_cast<int>(std::ceil(t_end / d.cfl_time_step(1.0)));
  const auto ref = solve(base * 64);
  std::vector<double> err;
  for (int f : {1, 2, 4, 8}) {
    const auto u = solve(base * f);
    double e = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) e = std::max(e, std::abs(u[i] - ref[i]));
    err.push_back(e);
  }
  bool ok = true;
  std::string slopes;
  for (std::size_t i = 0; i + 1 < err.size(); ++i) {
    const double s = std::log2(err[i] / err[i + 1]);
    ok = ok && std::abs(s - scheme.order) <= 0.2;
    slopes += (i ? ", " : "") + fmt(s, 4);
  }
  const double t = seconds_since(t0);
  return {ok && t < 120.0, "slopes " + slopes + " (design order " + std::to_string(scheme.order) + "), " + fmt(t) + " s"};
}

// ---------------------------------------------------------------------------

Outcome partition_independence() {
  bool ok = true;
  std::string detail;
  for (const char* name : {"hex-box", "mixed-box"}) {
    std::set<std::uint64_t> sums;
    int rebalances = 0;
    for (int ranks : {1, 2, 4}) {
      for (bool balance : {false, true}) {
        BenchConfig c = preset(name);
        c.steps = 50;
        c.n_ranks = ranks;
        c.balance.enabled = balance;
        const auto r = run_scenario(c);
        sums.insert(r.checksum);
        rebalances += r.record.n_rebalances;
      }
    }
    ok = ok && sums.size() == 1;
    detail += std::string(detail.empty() ? "" : "; ") + name + ": " + std::to_string(sums.size()) +
              " distinct checksum(s) over 6 runs, " + std::to_string(rebalances) + " rebalances";
  }
  return {ok, detail};
}

// ---------------------------------------------------------------------------

struct MixedRuns {
  ScenarioResult on, off;
};

MixedRuns mixed_runs() {
  BenchConfig c = preset("mixed-box");
  c.balance.threshold = 1.10;
  MixedRuns m;
  m.on = run_scenario(c);
  c.balance.enabled = false;
  m.off = run_scenario(c);
  return m;
}

Outcome modal_overhead(const MixedRuns& m) {
  const double hex = m.off.mean_cost_hex, modal = m.off.mean_cost_modal;
  const double ratio = hex > 0 ? modal / hex : 0.0;
  return {modal > hex && ratio >= 1.1 && ratio <= 3.0,
          "mean cost per element: modal " + fmt(modal * 1e6) + " us, hex " + fmt(hex * 1e6) + " us, ratio " +
              fmt(ratio, 4)};
}

double tail_mean(const std::vector<TracePoint>& trace, long steps) {
  double s = 0.0;
  int n = 0;
  for (const auto& t : trace)
    if (2 * (t.step + 1) > steps) s += t.imbalance, ++n;
  return n ? s / n : std::numeric_limits<double>::quiet_NaN();
}

double mean(const std::vector<TracePoint>& trace) {
  double s = 0.0;
  for (const auto& t : trace) s += t.imbalance;
  return trace.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(trace.size());
}

Outcome balancing_effectiveness(const MixedRuns& m) {
  int executed = 0, skipped = 0;
  bool reduced = true;
  for (const auto& e : m.on.events) {
    if (!e.executed) {
      ++skipped;
      continue;
    }
    ++executed;
    reduced = reduced && e.imbalance_after < e.imbalance_before;
  }
  const long steps = m.on.record.n_time_steps;
  const double on = tail_mean(m.on.trace, steps), off = mean(m.off.trace);
  return {reduced && executed > 0 && on <= off - 0.05,
          std::to_string(executed) + " rebalances (" + std::to_string(skipped) +
              " skipped), all reduce imbalance: " + (reduced ? "yes" : "no") + "; last-half imbalance " + fmt(on, 4) +
              " vs unbalanced " + fmt(off, 4)};
}

// ---------------------------------------------------------------------------

Outcome pid_and_scaling() {
  RunRecord r;
  r.wall_clock_time = 1.0;
  r.n_ranks = 1;
  r.n_dof = 1000;
  r.n_time_steps = 10;
  r.n_rk_stages = 5;
  const bool pid = compute_pid(r) == 2.0e-5;

  // Synthetic records: the baseline row must come out as exactly 1.
  std::vector<RunRecord> recs;
  for (int ranks : {2, 4, 8})
    for (double w : {0.7, 0.9}) {
      RunRecord x = r;
      x.n_ranks = ranks;
      x.wall_clock_time = w / ranks;
      recs.push_back(x);
    }
  const bool baseline = scaling_report(recs, ScalingMode::Strong).front().normalized == 1.0 &&
                        scaling_report(recs, ScalingMode::Weak).front().normalized == 1.0;

  // Measured strong scaling on the 8^3 hex box.
  BenchConfig c = preset("advect-scaling");
  c.repetitions = 3;
  const auto rows = run_scaling(c, {1, 2, 4, 8}, ScalingMode::Strong);
  bool monotone = rows.front().normalized == 1.0;
  std::string walls;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i && rows[i].mean_wall > rows[i - 1].mean_wall) monotone = false;
    walls += (i ? " > " : "") + fmt(rows[i].mean_wall, 3);
  }
  return {pid && baseline && monotone,
          std::string("PID fixture ") + (pid ? "exact" : "WRONG") + ", baselines " + (baseline ? "1.0" : "WRONG") +
              ", strong wall s on 1/2/4/8 workers: " + walls};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << std::setw(2) << id << "] " << name << ": " << o.detail
              << std::endl;
  };

  report(1, "SFC bijection and adjacency", sfc_properties);
  report(2, "partition oracle equivalence", partition_oracle);
  report(3, "exchange bit-exactness", exchange_bit_exact);
  report(4, "attribution conservation", attribution_conservation);
  report(5, "modal time stepping", modal_stepping);
  report(6, "temporal convergence", temporal_order);
  report(7, "partition independence", partition_independence);

  MixedRuns mixed;
  std::string mixed_error;
  try {
    mixed = mixed_runs();
  } catch (const std::exception& e) {
    mixed_error = e.what();
  }
  auto with_mixed = [&](Outcome (*fn)(const MixedRuns&)) {
    return [&, fn] {
      if (!mixed_error.empty()) throw std::runtime_error(mixed_error);
      return fn(mixed);
    };
  };
  report(8, "modal overhead direction", with_mixed(modal_overhead));
  report(9, "balancing effectiveness", with_mixed(balancing_effectiveness));
  report(10, "PID formula and scaling", pid_and_scaling);

  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed"))
            << std::endl;
  return failed ? 1 : 0;
}
