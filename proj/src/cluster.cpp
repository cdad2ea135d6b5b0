#include "sfcb/cluster.hpp"

#include <pthread.h>
#include <sched.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <tuple>

namespace sfcb {

namespace wire {

namespace {
void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
std::uint64_t get_le(const std::uint8_t* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}
}  // namespace

std::vector<std::uint8_t> encode_frame(std::uint32_t tag, std::span<const std::uint8_t> payload) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + payload.size());
  put_le(out, tag, 4);
  put_le(out, payload.size(), 8);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Frame decode_frame(std::span<const std::uint8_t> bytes, std::size_t& offset) {
  if (offset > bytes.size() || bytes.size() - offset < kHeaderBytes) {
    throw ParseError("truncated frame header", offset);
  }
  Frame f;
  f.tag = static_cast<std::uint32_t>(get_le(bytes.data() + offset, 4));
  const std::uint64_t n = get_le(bytes.data() + offset + 4, 8);
  if (n > bytes.size() - offset - kHeaderBytes) throw ParseError("truncated frame payload", offset + 4);
  const auto* p = bytes.data() + offset + kHeaderBytes;
  f.payload.assign(p, p + n);
  offset += kHeaderBytes + n;
  return f;
}

}  // namespace wire

namespace detail {

struct ClusterShared {
  ClusterShared(int n_ranks, ClusterOptions o)
      : n(n_ranks), opts(o), outbox(static_cast<std::size_t>(n_ranks)), expected(static_cast<std::size_t>(n_ranks)) {}

  int n;
  ClusterOptions opts;
  std::mutex m;
  std::condition_variable cv;
  long generation = 0;
  int arrived = 0;
  std::vector<std::vector<std::vector<std::uint8_t>>> outbox;  // [src][dst]
  std::vector<std::vector<std::int64_t>> expected;             // [dst][src], empty when unchecked
  bool aborted = false;
  int failed_rank = -1;
  std::string failure;
  std::map<std::tuple<int, int, int>, std::deque<std::vector<std::uint8_t>>> mail;  // (dst, src, tag)
  std::vector<std::vector<int>> sockets;                                            // [rank][peer]

  void abort_locked(int rank, const std::string& why) {
    if (!aborted) {
      aborted = true;
      failed_rank = rank;
      failure = why;
    }
    cv.notify_all();
  }

  [[noreturn]] void throw_aborted() const {
    throw CollectiveError("collective aborted after failure on rank " + std::to_string(failed_rank) + ": " +
                          failure);
  }

  void barrier_locked(std::unique_lock<std::mutex>& lk, int rank) {
    if (aborted) throw_aborted();
    const long gen = generation;
    if (++arrived == n) {
      arrived = 0;
      ++generation;
      cv.notify_all();
      return;
    }
    const bool done = cv.wait_for(lk, opts.timeout, [&] { return generation != gen || aborted; });
    if (generation != gen) return;
    if (!done) {
      abort_locked(rank, "collective timed out");
      throw CollectiveError("collective timed out on rank " + std::to_string(rank));
    }
    throw_aborted();
  }
};

namespace {

class MailboxTransport : public HaloTransport {
 public:
  MailboxTransport(ClusterShared& s, int rank) : s_(s), rank_(rank) {}

  void send(int dest, int tag, std::vector<std::uint8_t> bytes) override {
    std::lock_guard lk(s_.m);
    s_.mail[{dest, rank_, tag}].push_back(std::move(bytes));
    s_.cv.notify_all();
  }

  std::vector<std::uint8_t> recv(int src, int tag) override { return take(s_, rank_, src, tag); }

  static std::vector<std::uint8_t> take(ClusterShared& s, int rank, int src, int tag) {
    std::unique_lock lk(s.m);
    auto& q = s.mail[{rank, src, tag}];
    const bool ok = s.cv.wait_for(lk, s.opts.timeout, [&] { return !q.empty() || s.aborted; });
    if (!q.empty()) {
      auto out = std::move(q.front());
      q.pop_front();
      return out;
    }
    if (!ok) {
      s.abort_locked(rank, "receive timed out");
      throw CollectiveError("receive from rank " + std::to_string(src) + " timed out on rank " +
                            std::to_string(rank));
    }
    s.throw_aborted();
  }

 private:
  ClusterShared& s_;
  int rank_;
};

bool write_all(int fd, const std::uint8_t* p, std::size_t n) {
  while (n > 0) {
    const ssize_t k = ::send(fd, p, n, MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    p += k;
    n -= static_cast<std::size_t>(k);
  }
  return true;
}

bool read_exact(int fd, std::uint8_t* p, std::size_t n) {
  while (n > 0) {
    const ssize_t k = ::read(fd, p, n);
    if (k < 0 && errno == EINTR) continue;
    if (k <= 0) return false;
    p += k;
    n -= static_cast<std::size_t>(k);
  }
  return true;
}

/// Frames written to a socket pair; a reader thread per endpoint decodes them
/// into the receiving rank's mailbox.
class SocketTransport : public HaloTransport {
 public:
  SocketTransport(ClusterShared& s, int rank) : s_(s), rank_(rank) {}

  void send(int dest, int tag, std::vector<std::uint8_t> bytes) override {
    if (dest == rank_) {
      MailboxTransport(s_, rank_).send(dest, tag, std::move(bytes));
      return;
    }
    const auto frame = wire::encode_frame(static_cast<std::uint32_t>(tag), bytes);
    const int fd = s_.sockets[static_cast<std::size_t>(rank_)][static_cast<std::size_t>(dest)];
    if (!write_all(fd, frame.data(), frame.size())) {
      std::lock_guard lk(s_.m);
      s_.abort_locked(rank_, "socket write failed");
      throw CollectiveError("socket write to rank " + std::to_string(dest) + " failed");
    }
  }

  std::vector<std::uint8_t> recv(int src, int tag) override { return MailboxTransport::take(s_, rank_, src, tag); }

 private:
  ClusterShared& s_;
  int rank_;
};

void socket_reader(ClusterShared& s, int rank, int peer, int fd) {
  for (;;) {
    std::vector<std::uint8_t> buf(wire::kHeaderBytes);
    if (!read_exact(fd, buf.data(), buf.size())) return;
    std::uint64_t n = 0;
    for (int i = 0; i < 8; ++i) n |= static_cast<std::uint64_t>(buf[4 + static_cast<std::size_t>(i)]) << (8 * i);
    buf.resize(wire::kHeaderBytes + n);
    if (n > 0 && !read_exact(fd, buf.data() + wire::kHeaderBytes, n)) return;
    std::size_t off = 0;
    auto frame = wire::decode_frame(buf, off);
    std::lock_guard lk(s.m);
    s.mail[{rank, peer, static_cast<int>(frame.tag)}].push_back(std::move(frame.payload));
    s.cv.notify_all();
  }
}

void pin_current_thread(int rank) {
  cpu_set_t avail;
  CPU_ZERO(&avail);
  if (sched_getaffinity(0, sizeof(avail), &avail) != 0) return;
  std::vector<int> cpus;
  for (int c = 0; c < CPU_SETSIZE; ++c)
    if (CPU_ISSET(c, &avail)) cpus.push_back(c);
  if (cpus.empty()) return;
  cpu_set_t one;
  CPU_ZERO(&one);
  CPU_SET(cpus[static_cast<std::size_t>(rank) % cpus.size()], &one);
  pthread_setaffinity_np(pthread_self(), sizeof(one), &one);
}

template <class T>
std::vector<T> tree_reduce(const std::vector<std::vector<T>>& parts, std::size_t lo, std::size_t hi,
                           const std::function<T(T, T)>& op) {
  if (hi - lo == 1) return parts[lo];
  const std::size_t mid = lo + (hi - lo) / 2;
  auto a = tree_reduce(parts, lo, mid, op);
  const auto b = tree_reduce(parts, mid, hi, op);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = op(a[i], b[i]);
  return a;
}

}  // namespace
}  // namespace detail

Communicator::Communicator(std::shared_ptr<detail::ClusterShared> shared, int rank)
    : shared_(std::move(shared)), rank_(rank) {
  if (shared_->opts.socket_transport && shared_->n > 1) {
    p2p_ = std::make_unique<detail::SocketTransport>(*shared_, rank_);
  } else {
    p2p_ = std::make_unique<detail::MailboxTransport>(*shared_, rank_);
  }
}

Communicator::~Communicator() = default;

int Communicator::size() const { return shared_->n; }

void Communicator::barrier() {
  std::unique_lock lk(shared_->m);
  shared_->barrier_locked(lk, rank_);
}

std::vector<std::vector<std::uint8_t>> Communicator::exchange(std::vector<std::vector<std::uint8_t>> outgoing,
                                                             std::span<const std::int64_t> expected_bytes) {
  auto& s = *shared_;
  const auto n = static_cast<std::size_t>(s.n);
  const auto me = static_cast<std::size_t>(rank_);
  std::unique_lock lk(s.m);
  if (s.aborted) s.throw_aborted();
  s.outbox[me] = std::move(outgoing);
  s.expected[me].assign(expected_bytes.begin(), expected_bytes.end());
  s.barrier_locked(lk, rank_);
  // Every rank evaluates the same global check, so all of them agree on failure.
  std::string bad;
  for (std::size_t d = 0; d < n && bad.empty(); ++d) {
    if (s.expected[d].empty()) continue;
    for (std::size_t src = 0; src < n; ++src) {
      const auto sent = static_cast<std::int64_t>(s.outbox[src][d].size());
      if (sent != s.expected[d][src]) {
        bad = "rank " + std::to_string(src) + " sends " + std::to_string(sent) + " bytes to rank " +
              std::to_string(d) + " which expects " + std::to_string(s.expected[d][src]);
        break;
      }
    }
  }
  std::vector<std::vector<std::uint8_t>> incoming(n);
  if (bad.empty())
    for (std::size_t src = 0; src < n; ++src) incoming[src] = s.outbox[src][me];
  s.barrier_locked(lk, rank_);
  lk.unlock();
  if (!bad.empty()) throw CollectiveError("all-to-all count mismatch: " + bad);
  return incoming;
}

std::vector<std::vector<std::uint8_t>> Communicator::all_gather_bytes(std::span<const std::uint8_t> mine) {
  auto& s = *shared_;
  const auto n = static_cast<std::size_t>(s.n);
  std::unique_lock lk(s.m);
  if (s.aborted) s.throw_aborted();
  s.outbox[static_cast<std::size_t>(rank_)].assign(1, std::vector<std::uint8_t>(mine.begin(), mine.end()));
  s.barrier_locked(lk, rank_);
  std::vector<std::vector<std::uint8_t>> out(n);
  for (std::size_t r = 0; r < n; ++r) out[r] = s.outbox[r][0];
  s.barrier_locked(lk, rank_);
  return out;
}

namespace {
std::vector<double> reduce(Communicator& c, std::span<const double> values,
                           const std::function<double(double, double)>& op) {
  const auto parts = c.all_gather_bytes({reinterpret_cast<const std::uint8_t*>(values.data()), values.size_bytes()});
  std::vector<std::vector<double>> v(parts.size());
  for (std::size_t r = 0; r < parts.size(); ++r) {
    if (parts[r].size() != values.size_bytes()) throw CollectiveError("reduction operands differ in length");
    v[r].resize(values.size());
    if (!values.empty()) std::memcpy(v[r].data(), parts[r].data(), parts[r].size());
  }
  return detail::tree_reduce<double>(v, 0, v.size(), op);
}
}  // namespace

std::vector<double> Communicator::all_reduce_sum(std::span<const double> values) {
  return reduce(*this, values, [](double a, double b) { return a + b; });
}

std::vector<double> Communicator::all_reduce_max(std::span<const double> values) {
  return reduce(*this, values, [](double a, double b) { return std::max(a, b); });
}

double Communicator::all_reduce_sum(double v) { return all_reduce_sum(std::span<const double>(&v, 1))[0]; }

double Communicator::all_reduce_max(double v) { return all_reduce_max(std::span<const double>(&v, 1))[0]; }

namespace {
template <class T>
std::vector<T> alltoallv(Communicator& c, std::span<const T> send, std::span<const std::int64_t> send_counts,
                         std::span<const std::int64_t> send_displs, std::span<const std::int64_t> recv_counts,
                         const std::function<std::vector<std::vector<std::uint8_t>>(
                             std::vector<std::vector<std::uint8_t>>, std::span<const std::int64_t>)>& exchange) {
  const auto n = static_cast<std::size_t>(c.size());
  if (send_counts.size() != n || send_displs.size() != n || recv_counts.size() != n) {
    throw CollectiveError("count arrays must have one entry per rank");
  }
  std::vector<std::vector<std::uint8_t>> out(n);
  std::vector<std::int64_t> expected(n);
  for (std::size_t d = 0; d < n; ++d) {
    const auto cnt = send_counts[d], at = send_displs[d];
    if (cnt < 0 || at < 0 || static_cast<std::size_t>(at + cnt) > send.size()) {
      throw CollectiveError("send block for rank " + std::to_string(d) + " lies outside the send buffer");
    }
    const auto* p = reinterpret_cast<const std::uint8_t*>(send.data() + at);
    out[d].assign(p, p + static_cast<std::size_t>(cnt) * sizeof(T));
    expected[d] = recv_counts[d] * static_cast<std::int64_t>(sizeof(T));
  }
  const auto in = exchange(std::move(out), expected);
  std::vector<T> result;
  for (const auto& b : in) {
    const std::size_t at = result.size();
    result.resize(at + b.size() / sizeof(T));
    if (!b.empty()) std::memcpy(result.data() + at, b.data(), b.size());
  }
  return result;
}
}  // namespace

std::vector<double> Communicator::all_to_all_variable(std::span<const double> send,
                                                      std::span<const std::int64_t> send_counts,
                                                      std::span<const std::int64_t> send_displs,
                                                      std::span<const std::int64_t> recv_counts) {
  return alltoallv<double>(*this, send, send_counts, send_displs, recv_counts,
                           [this](auto o, auto e) { return exchange(std::move(o), e); });
}

std::vector<std::int64_t> Communicator::all_to_all_variable(std::span<const std::int64_t> send,
                                                            std::span<const std::int64_t> send_counts,
                                                            std::span<const std::int64_t> send_displs,
                                                            std::span<const std::int64_t> recv_counts) {
  return alltoallv<std::int64_t>(*this, send, send_counts, send_displs, recv_counts,
                                 [this](auto o, auto e) { return exchange(std::move(o), e); });
}

std::vector<std::vector<std::uint8_t>> spawn_cluster_bytes(
    int n_ranks, const std::function<std::vector<std::uint8_t>(Communicator&)>& program, const ClusterOptions& opts) {
  if (n_ranks < 1) throw ConfigError("cluster needs at least one rank");
  auto shared = std::make_shared<detail::ClusterShared>(n_ranks, opts);
  const auto n = static_cast<std::size_t>(n_ranks);
  std::vector<std::vector<std::uint8_t>> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::string> messages(n);
  int first_failure = -1;

  auto run_rank = [&](int r) {
    try {
      Communicator comm(shared, r);
      results[static_cast<std::size_t>(r)] = program(comm);
    } catch (const std::exception& e) {
      std::lock_guard lk(shared->m);
      errors[static_cast<std::size_t>(r)] = std::current_exception();
      messages[static_cast<std::size_t>(r)] = e.what();
      if (first_failure < 0) first_failure = r;
      shared->abort_locked(r, e.what());
    }
  };

  if (n_ranks == 1) {
    run_rank(0);
  } else {
    std::vector<std::thread> readers;
    if (opts.socket_transport) {
      shared->sockets.assign(n, std::vector<int>(n, -1));
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
          int sv[2];
          if (socketpair(AF_UNIX, SOCK_STREAM, 0, sv) != 0) {
            for (auto& row : shared->sockets)
              for (int fd : row)
                if (fd >= 0) ::close(fd);
            throw ClusterError(static_cast<int>(i), "socketpair failed");
          }
          shared->sockets[i][j] = sv[0];
          shared->sockets[j][i] = sv[1];
        }
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t p = 0; p < n; ++p)
          if (p != r) {
            readers.emplace_back(detail::socket_reader, std::ref(*shared), static_cast<int>(r), static_cast<int>(p),
                                 shared->sockets[r][p]);
          }
    }
    std::vector<std::thread> workers;
    workers.reserve(n);
    for (int r = 0; r < n_ranks; ++r) {
      workers.emplace_back([&, r] {
        if (opts.pin_workers) detail::pin_current_thread(r);
        run_rank(r);
      });
    }
    for (auto& t : workers) t.join();
    for (auto& row : shared->sockets)
      for (int fd : row)
        if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
    for (auto& t : readers) t.join();
    for (auto& row : shared->sockets)
      for (int fd : row)
        if (fd >= 0) ::close(fd);
  }

  if (first_failure >= 0) {
    const auto f = static_cast<std::size_t>(first_failure);
    throw ClusterError(first_failure, messages[f], errors[f]);
  }
  return results;
}

}  // namespace sfcb
