#include "sfcb/metrics.hpp"

#include <iomanip>
#include <map>
#include <sstream>

#include "sfcb/errors.hpp"

namespace sfcb {

double compute_pid(const RunRecord& r) {
  const double denom = static_cast<double>(r.n_dof) * static_cast<double>(r.n_time_steps) * r.n_rk_stages;
  if (!(denom > 0.0)) throw DomainError("PID needs positive dof, step and stage counts");
  return r.wall_clock_time * r.n_ranks / denom;
}

double compute_efficiency(const RunRecord& r) {
  const double h = r.cpu_hours();
  if (!(h > 0.0)) throw DomainError("efficiency needs positive CPU time");
  return r.simulated_time / h;
}

std::vector<ScalingRow> scaling_report(const std::vector<RunRecord>& records, ScalingMode mode) {
  std::map<int, ScalingRow> by_ranks;
  for (const auto& r : records) {
    auto& row = by_ranks[r.n_ranks];
    row.n_ranks = r.n_ranks;
    ++row.repetitions;
    row.mean_pid += compute_pid(r);
    row.mean_wall += r.wall_clock_time;
  }
  if (by_ranks.size() < 2) throw ReportError("scaling report needs at least two rank counts");
  std::vector<ScalingRow> rows;
  for (auto& [n, row] : by_ranks) {
    row.mean_pid /= row.repetitions;
    row.mean_wall /= row.repetitions;
    rows.push_back(row);
  }
  const auto& base = rows.front();
  if (!(base.mean_pid > 0.0)) throw ReportError("baseline PID is not positive");
  for (auto& row : rows) {
    if (&row == &rows.front()) {
      row.normalized = 1.0;
    } else if (mode == ScalingMode::Strong) {
      row.normalized = base.mean_pid * row.n_ranks / (row.mean_pid * base.n_ranks);
    } else {
      row.normalized = base.mean_pid / row.mean_pid;
    }
  }
  return rows;
}

void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows, ScalingMode mode) {
  out << "n_ranks,repetitions,mean_pid_s,mean_wall_s," << (mode == ScalingMode::Strong ? "speedup" : "efficiency")
      << '\n';
  out << std::setprecision(17);
  for (const auto& r : rows)
    out << r.n_ranks << ',' << r.repetitions << ',' << r.mean_pid << ',' << r.mean_wall << ',' << r.normalized << '\n';
}

void write_metrics_header(std::ostream& out) {
  out << "run_id,mode,n_ranks,n_elems_by_type,N,n_dof,steps,stages,wall_s,simulated_s,pid_s,efficiency,"
         "imbalance_before,imbalance_after,n_rebalances\n";
}

void write_metrics_row(std::ostream& out, const RunRecord& r) {
  std::ostringstream s;
  s << std::setprecision(17) << r.run_id << ',' << r.mode << ',' << r.n_ranks << ',' << r.n_elems_by_type << ','
    << r.degree << ',' << r.n_dof << ',' << r.n_time_steps << ',' << r.n_rk_stages << ',' << r.wall_clock_time << ','
    << r.simulated_time << ',' << compute_pid(r) << ',' << compute_efficiency(r) << ',' << r.imbalance_before << ','
    << r.imbalance_after << ',' << r.n_rebalances << '\n';
  out << s.str();
}

}  // namespace sfcb
