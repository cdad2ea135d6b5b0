#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

namespace sfcb {

enum class Category : std::uint8_t { DgElems = 0, DgSides = 1, DgModal = 2 };
inline constexpr int kNumCategories = 3;

enum class ClockKind : std::uint8_t {
  ThreadCpu,  ///< CPU time of the calling thread (default: ranks share cores)
  Monotonic,  ///< steady wall clock
};

/// Seconds on the requested clock.
double clock_seconds(ClockKind kind);

/// Accumulated section times of one rank over a measurement interval.
struct TimerSet {
  std::array<double, kNumCategories> t{};
  std::size_t n_elems = 0;
  std::size_t n_sides = 0;
  std::size_t n_modal_elems = 0;
  bool active = false;
  ClockKind clock = ClockKind::ThreadCpu;

  double& operator[](Category c) { return t[static_cast<int>(c)]; }
  double operator[](Category c) const { return t[static_cast<int>(c)]; }
  double total() const { return t[0] + t[1] + t[2]; }
  void reset() { t.fill(0.0); }

 private:
  friend class SectionTimer;
  int open_ = -1;
};

/// Scoped measurement of one category. A no-op while the set is inactive.
/// Opening a second section before the first closes throws std::logic_error.
class SectionTimer {
 public:
  SectionTimer(TimerSet& set, Category c);
  ~SectionTimer();
  SectionTimer(const SectionTimer&) = delete;
  SectionTimer& operator=(const SectionTimer&) = delete;

 private:
  TimerSet* set_ = nullptr;
  Category cat_;
  double start_ = 0.0;
};

/// Per-element cost from one interval:
///   every element      += t(DG_ELEMS) / nElems
///   every modal element += t(DG_MODAL) / nModalElems
///   side_to_elem[s]     += t(DG_SIDES) / nSides
/// Throws AttributionError when a category has time but nothing to attribute it to.
std::vector<double> attribute_costs(const TimerSet& timers, const std::vector<bool>& modal_flags,
                                    std::span<const std::size_t> side_to_elem);

/// Exponential moving average of per-element costs; weight 1 keeps only the latest interval.
class CostSmoother {
 public:
  explicit CostSmoother(double weight = 0.5);
  const std::vector<double>& update(std::span<const double> costs);
  const std::vector<double>& value() const { return ema_; }
  void reset() { ema_.clear(); }
  double weight() const { return weight_; }

 private:
  double weight_;
  std::vector<double> ema_;
};

/// CSV rows "step,element_global_id,cost_seconds"; the header is written when `header` is set.
void write_cost_csv(std::ostream& out, long step, std::int64_t first_global_id, std::span<const double> costs,
                    bool header);

}  // namespace sfcb
