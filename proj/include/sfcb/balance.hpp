#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "sfcb/cluster.hpp"

namespace sfcb {

/// offsets[r] .. offsets[r+1] is rank r's segment of the SFC.
using PartitionOffsets = std::vector<std::int64_t>;

/// Throws PlanError unless offsets start at 0, end at n_elems and never decrease.
void validate_offsets(const PartitionOffsets& offsets, std::int64_t n_elems);

/// Equal element counts per rank, remainder to the leading ranks.
PartitionOffsets uniform_partition(std::int64_t n_elems, int n_ranks);

std::vector<double> segment_loads(std::span<const double> weights, const PartitionOffsets& offsets);

/// max load / mean load; 1 when all weights are zero.
double compute_imbalance(std::span<const double> weights, const PartitionOffsets& offsets);

/// True iff imbalance > threshold. Throws ConfigError unless threshold > 1.
bool should_rebalance(double imbalance, double threshold);

enum class PartitionMode {
  Greedy,  ///< O(n) prefix-sum cuts nearest to r * total / k
  Exact,   ///< optimal bottleneck (probe-based search)
};

/// Contiguous partition of the weights over n_ranks. Deterministic.
PartitionOffsets repartition_sfc(std::span<const double> weights, int n_ranks,
                                 PartitionMode mode = PartitionMode::Greedy);

/// Element counts and displacements for one rank. Sends are indexed by
/// destination, receives by source; displacements are exclusive prefix sums.
struct ExchangePlan {
  int rank = 0;
  std::vector<std::int64_t> n_send, offset_send;
  std::vector<std::int64_t> n_recv, offset_recv;

  std::int64_t total_send() const;
  std::int64_t total_recv() const;
  /// Elements leaving or entering this rank (self-intersection excluded).
  std::int64_t moved() const;
};

ExchangePlan build_exchange_plan(const PartitionOffsets& old_offsets, const PartitionOffsets& new_offsets, int rank);

/// Redistributes fixed-size element slots. `data` holds the old local segment
/// (slot doubles per element, SFC order); on success it is replaced by the new
/// segment. Global ids travel with the payload and are validated; on any
/// mismatch every rank throws ExchangeError and `data` is left untouched.
void execute_exchange(Communicator& comm, const ExchangePlan& plan, const PartitionOffsets& old_offsets,
                      const PartitionOffsets& new_offsets, std::vector<double>& data, std::size_t slot);

/// Rough cost model deciding whether a rebalance pays for itself.
struct AmortizationModel {
  double bandwidth_bytes_per_s = 1e9;
  double fixed_cost_s = 0.0;  ///< re-initialization per rebalance
  /// Measures memcpy throughput on this machine.
  static double calibrate_bandwidth(std::size_t bytes = std::size_t{1} << 23);
  double exchange_cost(double bytes_moved) const { return fixed_cost_s + bytes_moved / bandwidth_bytes_per_s; }
};

/// Per-step savings (old bottleneck - new bottleneck, in seconds per step)
/// times the horizon, minus the exchange cost.
double projected_gain(double old_bottleneck_per_step, double new_bottleneck_per_step, long horizon_steps,
                      double exchange_cost_s);

struct BalanceEvent {
  long step = 0;
  double imbalance_before = 0.0;
  double imbalance_after = 0.0;
  std::int64_t elements_moved = 0;
  std::int64_t bytes_moved = 0;
  bool executed = true;
};

/// One JSON object per line.
void write_balance_event(std::ostream& out, const BalanceEvent& e);

}  // namespace sfcb
