#pragma once

#include <cstddef>
#include <exception>
#include <stdexcept>
#include <string>

namespace sfcb {

/// Invalid user-facing configuration (bad CLI flag, unsupported degree, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mesh topology or geometry is inconsistent (unmatched faces, non-affine cells).
class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed serialized input. Carries the byte offset where decoding failed.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Numerical blow-up detected in the solution state.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, long step)
      : std::runtime_error(what + " at step " + std::to_string(step)), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

class AttributionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PlanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ExchangeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A collective could not complete (count mismatch, timeout, aborted peer).
class CollectiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing neighbour data during halo exchange.
class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by spawn_cluster: the rank that failed first, its message and the
/// original exception.
class ClusterError : public std::runtime_error {
 public:
  ClusterError(int rank, const std::string& what, std::exception_ptr cause = nullptr)
      : std::runtime_error("rank " + std::to_string(rank) + ": " + what), rank_(rank), cause_(std::move(cause)) {}
  int rank() const noexcept { return rank_; }
  std::exception_ptr cause() const noexcept { return cause_; }

 private:
  int rank_;
  std::exception_ptr cause_;
};

}  // namespace sfcb
