#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sfcb/geometry.hpp"

// 3D Hilbert curve used to order mesh elements.
//
// The variant is Skilling's transposed-bits construction ("Programming the
// Hilbert curve", AIP Conf. Proc. 707, 2004): coordinates are transformed in
// place into the transposed Hilbert index, whose bits are then interleaved
// most-significant first with axis 0 leading. Index 0 is the cell at the
// origin and consecutive indices are always face neighbours.

namespace sfcb::sfc {

inline constexpr int kMaxLevel = 21;      // 3 * 21 = 63 bits
inline constexpr int kDefaultLevel = 10;  // 1024^3 lattice for barycenter sorting

struct GridCoord {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  std::uint32_t k = 0;
  int level = 1;

  friend bool operator==(const GridCoord&, const GridCoord&) = default;
};

struct SfcIndex {
  std::uint64_t value = 0;

  friend auto operator<=>(const SfcIndex&, const SfcIndex&) = default;
};

/// Throws std::domain_error if the coordinate lies outside [0, 2^level)^3.
SfcIndex hilbert_encode(const GridCoord& coord);

/// Throws std::domain_error if index >= 8^level.
GridCoord hilbert_decode(SfcIndex index, int level);

/// Lattice cell of a point inside `box` at the given level. An axis with zero
/// extent maps to cell 0. Points outside the box raise std::domain_error.
GridCoord quantize(const Vec3& point, const Box& box, int level);

/// Stable ordering of points by the Hilbert index of their quantized
/// position; equal indices keep their input order.
std::vector<std::size_t> sfc_sort_permutation(std::span<const Vec3> barycenters, const Box& box,
                                              int level = kDefaultLevel);

}  // namespace sfcb::sfc
