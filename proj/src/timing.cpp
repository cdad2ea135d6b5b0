#include "sfcb/timing.hpp"

#include <chrono>
#include <ctime>
#include <iomanip>
#include <stdexcept>

#include "sfcb/errors.hpp"

namespace sfcb {

double clock_seconds(ClockKind kind) {
  if (kind == ClockKind::ThreadCpu) {
    timespec ts{};
    clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
    return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
  }
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

SectionTimer::SectionTimer(TimerSet& set, Category c) : cat_(c) {
  if (!set.active) return;
  if (set.open_ >= 0) throw std::logic_error("timer sections must not nest");
  set.open_ = static_cast<int>(c);
  set_ = &set;
  start_ = clock_seconds(set.clock);
}

SectionTimer::~SectionTimer() {
  if (!set_) return;
  (*set_)[cat_] += clock_seconds(set_->clock) - start_;
  set_->open_ = -1;
}

std::vector<double> attribute_costs(const TimerSet& timers, const std::vector<bool>& modal_flags,
                                    std::span<const std::size_t> side_to_elem) {
  const std::size_t n_elems = modal_flags.size();
  std::size_t n_modal = 0;
  for (bool m : modal_flags) n_modal += m ? 1 : 0;
  const double te = timers[Category::DgElems], ts = timers[Category::DgSides], tm = timers[Category::DgModal];
  if (te < 0 || ts < 0 || tm < 0) throw AttributionError("negative timer value");
  if (n_elems == 0 && te + ts + tm > 0) throw AttributionError("time recorded on a rank without elements");
  if (n_modal == 0 && tm > 0) throw AttributionError("DG_MODAL time recorded without modal elements");
  if (side_to_elem.empty() && ts > 0) throw AttributionError("DG_SIDES time recorded without sides");

  std::vector<double> cost(n_elems, 0.0);
  if (n_elems == 0) return cost;
  const double per_elem = te / static_cast<double>(n_elems);
  const double per_modal = n_modal ? tm / static_cast<double>(n_modal) : 0.0;
  for (std::size_t e = 0; e < n_elems; ++e) cost[e] = per_elem + (modal_flags[e] ? per_modal : 0.0);
  if (!side_to_elem.empty()) {
    const double per_side = ts / static_cast<double>(side_to_elem.size());
    for (auto e : side_to_elem) {
      if (e >= n_elems) throw AttributionError("side mapped to an element outside the partition");
      cost[e] += per_side;
    }
  }
  return cost;
}

CostSmoother::CostSmoother(double weight) : weight_(weight) {
  if (!(weight > 0.0 && weight <= 1.0)) throw std::invalid_argument("smoothing weight must lie in (0, 1]");
}

const std::vector<double>& CostSmoother::update(std::span<const double> costs) {
  if (ema_.size() != costs.size()) {
    ema_.assign(costs.begin(), costs.end());
    return ema_;
  }
  for (std::size_t i = 0; i < costs.size(); ++i) ema_[i] = weight_ * costs[i] + (1.0 - weight_) * ema_[i];
  return ema_;
}

void write_cost_csv(std::ostream& out, long step, std::int64_t first_global_id, std::span<const double> costs,
                    bool header) {
  if (header) out << "step,element_global_id,cost_seconds\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < costs.size(); ++i) {
    out << step << ',' << first_global_id + static_cast<std::int64_t>(i) << ',' << costs[i] << '\n';
  }
}

}  // namespace sfcb
