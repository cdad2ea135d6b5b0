#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfcb/balance.hpp"
#include "sfcb/kernel.hpp"
#include "sfcb/metrics.hpp"
#include "sfcb/timing.hpp"

namespace sfcb {

/// Version stamp written into every output directory.
std::string code_version();

struct BalanceSettings {
  bool enabled = true;
  double threshold = 1.10;
  int interval = 10;         ///< measure every K-th step
  double ema_weight = 0.5;   ///< 1 disables smoothing
  PartitionMode mode = PartitionMode::Greedy;
  double fixed_cost_s = 0.0;  ///< re-initialization estimate per rebalance
};

struct BenchConfig {
  std::string scenario = "hex-box";
  std::array<int, 3> dims{8, 8, 8};
  std::array<double, 3> extent{1.0, 1.0, 1.0};
  bool mixed = false;  ///< apply the quarter split preset
  int degree = 5;
  int n_var = 1;
  std::array<double, 3> velocity{1.0, 1.0, 1.0};
  bool uniform_initial = false;  ///< constant state instead of smooth waves
  int n_ranks = 1;
  long steps = 100;
  double end_time = 0.0;  ///< > 0 overrides steps
  double dt = 0.0;        ///< 0 selects the CFL estimate
  double courant = 0.5;
  std::string scheme = "ck45";
  BalanceSettings balance;
  std::uint64_t seed = 1;
  std::string out_dir;  ///< empty: no files written
  bool socket_transport = false;
  ClockKind clock = ClockKind::ThreadCpu;
  int repetitions = 5;  ///< scaling runs per rank count

  /// Throws ConfigError on the first invalid field.
  void validate() const;
};

/// Named presets: hex-box, mixed-box, advect-scaling. Throws ConfigError otherwise.
BenchConfig preset(const std::string& scenario);

nlohmann::json to_json(const BenchConfig& c);
/// Fields absent from `j` keep the values of `base`; unknown keys are rejected.
BenchConfig config_from_json(const nlohmann::json& j, BenchConfig base);

/// Builds the mesh described by the config.
Mesh build_mesh(const BenchConfig& c);

struct TracePoint {
  long step = 0;
  double imbalance = 1.0;         ///< from the measured per-rank loads
  std::vector<double> rank_loads;  ///< seconds per rank for the measured step
};

struct ScenarioResult {
  RunRecord record;
  std::vector<TracePoint> trace;
  std::vector<BalanceEvent> events;  ///< executed and skipped rebalances
  std::uint64_t checksum = 0;        ///< FNV-1a over the final nodal state in SFC order
  std::vector<double> final_state;
  double dt = 0.0;
  std::array<std::size_t, 4> counts{};
  /// Mean attributed cost per element over all measured intervals.
  double mean_cost_hex = 0.0;
  double mean_cost_modal = 0.0;
  std::vector<PartitionOffsets> partitions;  ///< initial and after every executed rebalance
};

/// Runs the time loop on a simulated cluster. The chosen time step is
/// reported to `log` before the loop starts. Errors: DivergenceError,
/// ConfigError, or ClusterError for collective/topology failures.
ScenarioResult run_scenario(const BenchConfig& c, std::ostream* log = nullptr);

/// Strong: fixed mesh. Weak: streamwise (x) elements and extent scale with the
/// rank count relative to the first entry. Runs `repetitions` times per count.
std::vector<ScalingRow> run_scaling(const BenchConfig& c, const std::vector<int>& rank_counts, ScalingMode mode,
                                    std::vector<RunRecord>* records = nullptr);

/// Writes config.json, metrics.csv, trace.csv, balance_events.jsonl and checksum.txt.
void write_outputs(const std::filesystem::path& dir, const BenchConfig& c, const ScenarioResult& r);

std::uint64_t state_checksum(const std::vector<double>& state);

}  // namespace sfcb
