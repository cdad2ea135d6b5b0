#pragma once

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sfcb {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct RunRecord {
  std::string run_id;
  std::string mode = "single";  ///< single | strong | weak
  double wall_clock_time = 0.0;  ///< seconds
  int n_ranks = 1;
  std::int64_t n_dof = 0;
  long n_time_steps = 0;
  int n_rk_stages = 0;
  double simulated_time = 0.0;  ///< physical seconds advanced
  std::string n_elems_by_type;  ///< e.g. "hex:128;tet:896;prism:256;pyramid:704"
  int degree = 0;
  double imbalance_before = 1.0;
  double imbalance_after = 1.0;
  int n_rebalances = 0;

  double cpu_hours() const { return n_ranks * wall_clock_time / 3600.0; }
};

/// wall * ranks / (dof * steps * stages), seconds per DOF and stage.
double compute_pid(const RunRecord& r);

/// Simulated seconds per CPU hour.
double compute_efficiency(const RunRecord& r);

enum class ScalingMode { Strong, Weak };

struct ScalingRow {
  int n_ranks = 0;
  int repetitions = 0;
  double mean_pid = 0.0;
  double mean_wall = 0.0;
  double normalized = 0.0;  ///< speed-up (strong) or efficiency (weak); 1 at the baseline
};

/// Groups records by rank count, averages PID over repetitions and normalizes
/// to the smallest rank count. Strong: PID_b r / (PID_r b). Weak: PID_b / PID_r.
/// Throws ReportError with fewer than two rank counts.
std::vector<ScalingRow> scaling_report(const std::vector<RunRecord>& records, ScalingMode mode);

void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows, ScalingMode mode);

/// Metrics CSV: run_id, mode, n_ranks, n_elems_by_type, N, n_dof, steps,
/// stages, wall_s, simulated_s, pid_s, efficiency, imbalance_before,
/// imbalance_after, n_rebalances.
void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const RunRecord& r);

}  // namespace sfcb
