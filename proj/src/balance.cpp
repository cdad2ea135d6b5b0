#include "sfcb/balance.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <limits>
#include <json.hpp>
#include <numeric>
#include <string>

namespace sfcb {

void validate_offsets(const PartitionOffsets& offsets, std::int64_t n_elems) {
  if (offsets.size() < 2) throw PlanError("partition needs at least one rank");
  if (offsets.front() != 0) throw PlanError("partition must start at element 0");
  if (offsets.back() != n_elems) {
    throw PlanError("partition covers " + std::to_string(offsets.back()) + " elements, expected " +
                    std::to_string(n_elems));
  }
  for (std::size_t r = 1; r < offsets.size(); ++r)
    if (offsets[r] < offsets[r - 1]) throw PlanError("partition offsets decrease at rank " + std::to_string(r - 1));
}

PartitionOffsets uniform_partition(std::int64_t n_elems, int n_ranks) {
  if (n_ranks < 1) throw ConfigError("need at least one rank");
  PartitionOffsets o(static_cast<std::size_t>(n_ranks) + 1, 0);
  const std::int64_t base = n_elems / n_ranks, extra = n_elems % n_ranks;
  for (int r = 0; r < n_ranks; ++r) o[static_cast<std::size_t>(r) + 1] = o[static_cast<std::size_t>(r)] + base + (r < extra);
  return o;
}

std::vector<double> segment_loads(std::span<const double> weights, const PartitionOffsets& offsets) {
  validate_offsets(offsets, static_cast<std::int64_t>(weights.size()));
  std::vector<double> loads(offsets.size() - 1, 0.0);
  for (std::size_t r = 0; r + 1 < offsets.size(); ++r)
    for (auto i = offsets[r]; i < offsets[r + 1]; ++i) loads[r] += weights[static_cast<std::size_t>(i)];
  return loads;
}

double compute_imbalance(std::span<const double> weights, const PartitionOffsets& offsets) {
  const auto loads = segment_loads(weights, offsets);
  const double total = std::accumulate(loads.begin(), loads.end(), 0.0);
  if (!(total > 0.0)) return 1.0;
  const double mean = total / static_cast<double>(loads.size());
  return *std::max_element(loads.begin(), loads.end()) / mean;
}

bool should_rebalance(double imbalance, double threshold) {
  if (!(threshold > 1.0)) throw ConfigError("imbalance threshold must exceed 1");
  return imbalance > threshold;
}

namespace {

std::vector<double> prefix_sums(std::span<const double> w) {
  std::vector<double> p(w.size() + 1, 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(w[i] >= 0.0)) throw ConfigError("element weights must be non-negative");
    p[i + 1] = p[i] + w[i];
  }
  return p;
}

// Largest j in [from, n] with p[j] - p[from] <= bound.
std::size_t furthest_cut(const std::vector<double>& p, std::size_t from, double bound) {
  std::size_t lo = from, hi = p.size() - 1;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo + 1) / 2;
    if (p[mid] - p[from] <= bound) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return lo;
}

bool feasible(const std::vector<double>& p, std::size_t from, int procs, double bound) {
  std::size_t pos = from;
  for (int i = 0; i < procs && pos + 1 < p.size(); ++i) pos = furthest_cut(p, pos, bound);
  return pos + 1 == p.size();
}

PartitionOffsets greedy(const std::vector<double>& p, int k) {
  const std::size_t n = p.size() - 1;
  PartitionOffsets o(static_cast<std::size_t>(k) + 1, 0);
  o[static_cast<std::size_t>(k)] = static_cast<std::int64_t>(n);
  const double ideal = p[n] / k;
  std::size_t prev = 0;
  for (int r = 1; r < k; ++r) {
    const double target = r * ideal;
    auto j = static_cast<std::size_t>(std::lower_bound(p.begin() + static_cast<std::ptrdiff_t>(prev), p.end(), target) -
                                      p.begin());
    if (j > n) j = n;
    // Look back one element when the shorter cut lands closer to the target.
    if (j > prev && std::abs(p[j - 1] - target) <= std::abs(p[j] - target)) --j;
    o[static_cast<std::size_t>(r)] = static_cast<std::int64_t>(j);
    prev = j;
  }
  return o;
}

PartitionOffsets exact(const std::vector<double>& p, int k) {
  const std::size_t n = p.size() - 1;
  double best = std::numeric_limits<double>::infinity();
  std::size_t start = 0;
  for (int proc = 0; proc + 1 < k && start < n; ++proc) {
    const int procs_left = k - proc;
    std::size_t lo = start, hi = n;
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (feasible(p, start, procs_left, p[mid] - p[start])) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    best = std::min(best, p[lo] - p[start]);
    if (lo == start) break;
    start = lo - 1;
  }
  if (start < n) best = std::min(best, p[n] - p[start]);
  if (k == 1) best = p[n];

  PartitionOffsets o(static_cast<std::size_t>(k) + 1, static_cast<std::int64_t>(n));
  o[0] = 0;
  std::size_t pos = 0;
  for (int r = 1; r < k; ++r) {
    pos = furthest_cut(p, pos, best);
    o[static_cast<std::size_t>(r)] = static_cast<std::int64_t>(pos);
  }
  return o;
}

}  // namespace

PartitionOffsets repartition_sfc(std::span<const double> weights, int n_ranks, PartitionMode mode) {
  if (n_ranks < 1) throw ConfigError("need at least one rank");
  const auto p = prefix_sums(weights);
  if (!(p.back() > 0.0)) return uniform_partition(static_cast<std::int64_t>(weights.size()), n_ranks);
  return mode == PartitionMode::Exact ? exact(p, n_ranks) : greedy(p, n_ranks);
}

std::int64_t ExchangePlan::total_send() const { return std::accumulate(n_send.begin(), n_send.end(), std::int64_t{0}); }

std::int64_t ExchangePlan::total_recv() const { return std::accumulate(n_recv.begin(), n_recv.end(), std::int64_t{0}); }

std::int64_t ExchangePlan::moved() const {
  const auto self = static_cast<std::size_t>(rank);
  return total_send() - n_send[self] + total_recv() - n_recv[self];
}

ExchangePlan build_exchange_plan(const PartitionOffsets& old_offsets, const PartitionOffsets& new_offsets, int rank) {
  if (old_offsets.size() != new_offsets.size()) throw PlanError("old and new partitions have different rank counts");
  if (old_offsets.empty() || old_offsets.back() != new_offsets.back()) {
    throw PlanError("old and new partitions cover different element counts");
  }
  validate_offsets(old_offsets, old_offsets.back());
  validate_offsets(new_offsets, new_offsets.back());
  const auto n = old_offsets.size() - 1;
  if (rank < 0 || static_cast<std::size_t>(rank) >= n) throw PlanError("rank outside the partition");
  const auto r = static_cast<std::size_t>(rank);
  auto overlap = [](std::int64_t a0, std::int64_t a1, std::int64_t b0, std::int64_t b1) {
    return std::max<std::int64_t>(0, std::min(a1, b1) - std::max(a0, b0));
  };
  ExchangePlan plan;
  plan.rank = rank;
  plan.n_send.resize(n);
  plan.offset_send.resize(n);
  plan.n_recv.resize(n);
  plan.offset_recv.resize(n);
  std::int64_t s_at = 0, r_at = 0;
  for (std::size_t s = 0; s < n; ++s) {
    plan.n_send[s] = overlap(old_offsets[r], old_offsets[r + 1], new_offsets[s], new_offsets[s + 1]);
    plan.offset_send[s] = s_at;
    s_at += plan.n_send[s];
    plan.n_recv[s] = overlap(new_offsets[r], new_offsets[r + 1], old_offsets[s], old_offsets[s + 1]);
    plan.offset_recv[s] = r_at;
    r_at += plan.n_recv[s];
  }
  return plan;
}

void execute_exchange(Communicator& comm, const ExchangePlan& plan, const PartitionOffsets& old_offsets,
                      const PartitionOffsets& new_offsets, std::vector<double>& data, std::size_t slot) {
  const auto n = static_cast<std::size_t>(comm.size());
  const auto me = static_cast<std::size_t>(comm.rank());
  const auto sl = static_cast<std::int64_t>(slot);

  std::string local_error;
  if (plan.rank != comm.rank() || plan.n_send.size() != n || plan.n_recv.size() != n ||
      old_offsets.size() != n + 1 || new_offsets.size() != n + 1) {
    local_error = "plan does not match the communicator";
  } else if (static_cast<std::int64_t>(data.size()) != (old_offsets[me + 1] - old_offsets[me]) * sl ||
             plan.total_send() != old_offsets[me + 1] - old_offsets[me]) {
    local_error = "local payload does not match the old partition";
  }
  if (comm.all_reduce_max(local_error.empty() ? 0.0 : 1.0) > 0.0) {
    throw ExchangeError(local_error.empty() ? "exchange aborted: inconsistent plan on another rank" : local_error);
  }

  // Self-intersection is copied locally; everything else goes through one
  // variable all-to-all for payloads and one for global ids.
  std::vector<std::int64_t> cnt(n), disp(n), rcnt(n), id_cnt(n), id_disp(n), id_rcnt(n);
  std::vector<std::int64_t> ids(static_cast<std::size_t>(plan.total_send()));
  std::iota(ids.begin(), ids.end(), old_offsets[me]);
  for (std::size_t s = 0; s < n; ++s) {
    const bool self = s == me;
    id_cnt[s] = self ? 0 : plan.n_send[s];
    id_disp[s] = plan.offset_send[s];
    id_rcnt[s] = self ? 0 : plan.n_recv[s];
    cnt[s] = id_cnt[s] * sl;
    disp[s] = id_disp[s] * sl;
    rcnt[s] = id_rcnt[s] * sl;
  }
  std::vector<double> payload;
  std::vector<std::int64_t> got_ids;
  try {
    payload = comm.all_to_all_variable(std::span<const double>(data), cnt, disp, rcnt);
    got_ids = comm.all_to_all_variable(std::span<const std::int64_t>(ids), id_cnt, id_disp, id_rcnt);
  } catch (const CollectiveError& e) {
    throw ExchangeError(std::string("exchange failed: ") + e.what());
  }

  const std::int64_t new_count = new_offsets[me + 1] - new_offsets[me];
  std::vector<double> fresh(static_cast<std::size_t>(new_count * sl));
  std::vector<std::int64_t> fresh_ids(static_cast<std::size_t>(new_count), -1);
  std::size_t pay_at = 0, id_at = 0;
  bool ok = plan.total_recv() == new_count;
  for (std::size_t s = 0; s < n && ok; ++s) {
    const auto dst = static_cast<std::size_t>(plan.offset_recv[s]);
    const auto k = static_cast<std::size_t>(plan.n_recv[s]);
    if (s == me) {
      const auto src = static_cast<std::size_t>(plan.offset_send[me]);
      if (k != static_cast<std::size_t>(plan.n_send[me])) {
        ok = false;
        break;
      }
      std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(src * slot), k * slot,
                  fresh.begin() + static_cast<std::ptrdiff_t>(dst * slot));
      std::copy_n(ids.begin() + static_cast<std::ptrdiff_t>(src), k, fresh_ids.begin() + static_cast<std::ptrdiff_t>(dst));
      continue;
    }
    if (pay_at + k * slot > payload.size() || id_at + k > got_ids.size()) {
      ok = false;
      break;
    }
    std::copy_n(payload.begin() + static_cast<std::ptrdiff_t>(pay_at), k * slot,
                fresh.begin() + static_cast<std::ptrdiff_t>(dst * slot));
    std::copy_n(got_ids.begin() + static_cast<std::ptrdiff_t>(id_at), k, fresh_ids.begin() + static_cast<std::ptrdiff_t>(dst));
    pay_at += k * slot;
    id_at += k;
  }
  ok = ok && pay_at == payload.size() && id_at == got_ids.size();
  for (std::size_t i = 0; i < fresh_ids.size() && ok; ++i)
    ok = fresh_ids[i] == new_offsets[me] + static_cast<std::int64_t>(i);
  // Validation collective: either every rank swaps or none does.
  if (comm.all_reduce_max(ok ? 0.0 : 1.0) > 0.0) {
    throw ExchangeError(ok ? "exchange aborted: validation failed on another rank"
                           : "received elements do not tile the new segment");
  }
  data.swap(fresh);
}

double AmortizationModel::calibrate_bandwidth(std::size_t bytes) {
  std::vector<char> a(bytes, 1), b(bytes, 0);
  double best = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 3; ++rep) {
    const auto t0 = std::chrono::steady_clock::now();
    std::memcpy(b.data(), a.data(), bytes);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    best = std::min(best, dt);
    a[static_cast<std::size_t>(rep)] = b[bytes - 1];
  }
  return best > 0.0 ? static_cast<double>(bytes) / best : 1e10;
}

double projected_gain(double old_bottleneck_per_step, double new_bottleneck_per_step, long horizon_steps,
                      double exchange_cost_s) {
  return (old_bottleneck_per_step - new_bottleneck_per_step) * static_cast<double>(horizon_steps) - exchange_cost_s;
}

void write_balance_event(std::ostream& out, const BalanceEvent& e) {
  nlohmann::json j;
  j["step"] = e.step;
  j["imbalance_before"] = e.imbalance_before;
  j["imbalance_after"] = e.imbalance_after;
  j["elements_moved"] = e.elements_moved;
  j["bytes_moved"] = e.bytes_moved;
  j["executed"] = e.executed;
  out << j.dump() << '\n';
}

}  // namespace sfcb
