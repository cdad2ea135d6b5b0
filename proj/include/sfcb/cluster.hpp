#pragma once

#include <chrono>
#include <cstdint>
#include <cstring>
#include <functional>
#include <memory>
#include <span>
#include <type_traits>
#include <vector>

#include "sfcb/errors.hpp"
#include "sfcb/kernel.hpp"

namespace sfcb {

struct ClusterOptions {
  std::chrono::milliseconds timeout{30000};  ///< deadlock detection for every blocking wait
  bool socket_transport = false;             ///< point-to-point traffic over AF_UNIX socket pairs
  bool pin_workers = true;
};

namespace detail {
struct ClusterShared;
}

/// Handle of one simulated rank. Collectives must be entered by every rank in
/// the same order; each is a full synchronization point.
class Communicator {
 public:
  Communicator(std::shared_ptr<detail::ClusterShared> shared, int rank);
  ~Communicator();
  Communicator(const Communicator&) = delete;
  Communicator& operator=(const Communicator&) = delete;

  int rank() const { return rank_; }
  int size() const;

  void barrier();

  /// Every rank's bytes, indexed by rank.
  std::vector<std::vector<std::uint8_t>> all_gather_bytes(std::span<const std::uint8_t> mine);

  template <class T>
  std::vector<T> all_gather(const T& value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    const auto parts = all_gather_bytes({p, sizeof(T)});
    std::vector<T> out(parts.size());
    for (std::size_t r = 0; r < parts.size(); ++r) std::memcpy(&out[r], parts[r].data(), sizeof(T));
    return out;
  }

  /// Concatenation of every rank's vector in rank order.
  template <class T>
  std::vector<T> all_gather_vector(std::span<const T> mine) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto parts =
        all_gather_bytes({reinterpret_cast<const std::uint8_t*>(mine.data()), mine.size_bytes()});
    std::vector<T> out;
    for (const auto& p : parts) {
      const std::size_t n = p.size() / sizeof(T);
      const std::size_t at = out.size();
      out.resize(at + n);
      if (n) std::memcpy(out.data() + at, p.data(), p.size());
    }
    return out;
  }

  /// Element-wise reductions over ranks with a fixed pairwise tree in rank
  /// order, so results do not depend on scheduling.
  std::vector<double> all_reduce_sum(std::span<const double> values);
  std::vector<double> all_reduce_max(std::span<const double> values);
  double all_reduce_sum(double v);
  double all_reduce_max(double v);

  /// Variable all-to-all. send holds the blocks for rank s at
  /// [send_displs[s], send_displs[s] + send_counts[s]); recv_counts[s] is what
  /// this rank expects from s. The result is laid out by ascending source rank.
  /// A count disagreement between any pair raises CollectiveError on all ranks.
  std::vector<double> all_to_all_variable(std::span<const double> send, std::span<const std::int64_t> send_counts,
                                          std::span<const std::int64_t> send_displs,
                                          std::span<const std::int64_t> recv_counts);
  std::vector<std::int64_t> all_to_all_variable(std::span<const std::int64_t> send,
                                                std::span<const std::int64_t> send_counts,
                                                std::span<const std::int64_t> send_displs,
                                                std::span<const std::int64_t> recv_counts);

  /// Point-to-point channel for halo traffic (mailboxes or sockets).
  HaloTransport& p2p() { return *p2p_; }

 private:
  std::vector<std::vector<std::uint8_t>> exchange(std::vector<std::vector<std::uint8_t>> outgoing,
                                                  std::span<const std::int64_t> expected_bytes);

  std::shared_ptr<detail::ClusterShared> shared_;
  int rank_;
  std::unique_ptr<HaloTransport> p2p_;
};

/// Runs `program` once per rank on its own thread (inline when n_ranks is 1)
/// and returns the per-rank results. The first rank to fail aborts all
/// pending collectives; its error is rethrown as ClusterError.
std::vector<std::vector<std::uint8_t>> spawn_cluster_bytes(
    int n_ranks, const std::function<std::vector<std::uint8_t>(Communicator&)>& program,
    const ClusterOptions& opts = {});

template <class R>
std::vector<R> spawn_cluster(int n_ranks, const std::function<R(Communicator&)>& program,
                             const ClusterOptions& opts = {}) {
  std::vector<R> results(static_cast<std::size_t>(n_ranks > 0 ? n_ranks : 0));
  spawn_cluster_bytes(
      n_ranks,
      [&](Communicator& c) {
        results[static_cast<std::size_t>(c.rank())] = program(c);
        return std::vector<std::uint8_t>{};
      },
      opts);
  return results;
}

/// Socket frame: u32 tag, u64 payload byte count, payload; little-endian.
namespace wire {
inline constexpr std::size_t kHeaderBytes = 12;
std::vector<std::uint8_t> encode_frame(std::uint32_t tag, std::span<const std::uint8_t> payload);
struct Frame {
  std::uint32_t tag = 0;
  std::vector<std::uint8_t> payload;
};
/// Decodes the frame starting at `offset` and advances it. Throws ParseError
/// when the buffer ends inside the header or the payload.
Frame decode_frame(std::span<const std::uint8_t> bytes, std::size_t& offset);
}  // namespace wire

}  // namespace sfcb
