#include "sfcb/sfc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace sfcb::sfc {
namespace {

void check_level(int level) {
  if (level < 1 || level > kMaxLevel) {
    throw std::domain_error("hilbert level " + std::to_string(level) + " outside [1, " +
                            std::to_string(kMaxLevel) + "]");
  }
}

// Skilling: axes -> transposed Hilbert index, in place.
void axes_to_transpose(std::array<std::uint32_t, 3>& x, int bits) {
  const std::uint32_t m = 1u << (bits - 1);
  for (std::uint32_t q = m; q > 1; q >>= 1) {
    const std::uint32_t p = q - 1;
    for (int i = 0; i < 3; ++i) {
      if (x[i] & q) {
        x[0] ^= p;
      } else {
        const std::uint32_t t = (x[0] ^ x[i]) & p;
        x[0] ^= t;
        x[i] ^= t;
      }
    }
  }
  for (int i = 1; i < 3; ++i) x[i] ^= x[i - 1];
  std::uint32_t t = 0;
  for (std::uint32_t q = m; q > 1; q >>= 1) {
    if (x[2] & q) t ^= q - 1;
  }
  for (auto& xi : x) xi ^= t;
}

void transpose_to_axes(std::array<std::uint32_t, 3>& x, int bits) {
  const std::uint64_t n = std::uint64_t{2} << (bits - 1);
  std::uint32_t t = x[2] >> 1;
  for (int i = 2; i > 0; --i) x[i] ^= x[i - 1];
  x[0] ^= t;
  for (std::uint64_t q64 = 2; q64 != n; q64 <<= 1) {
    const auto q = static_cast<std::uint32_t>(q64);
    const std::uint32_t p = q - 1;
    for (int i = 2; i >= 0; --i) {
      if (x[i] & q) {
        x[0] ^= p;
      } else {
        t = (x[0] ^ x[i]) & p;
        x[0] ^= t;
        x[i] ^= t;
      }
    }
  }
}

}  // namespace

SfcIndex hilbert_encode(const GridCoord& coord) {
  check_level(coord.level);
  const std::uint64_t side = std::uint64_t{1} << coord.level;
  if (coord.i >= side || coord.j >= side || coord.k >= side) {
    throw std::domain_error("grid coordinate outside [0, 2^level)");
  }
  std::array<std::uint32_t, 3> x{coord.i, coord.j, coord.k};
  axes_to_transpose(x, coord.level);
  std::uint64_t index = 0;
  for (int b = coord.level - 1; b >= 0; --b) {
    for (int d = 0; d < 3; ++d) index = (index << 1) | ((x[d] >> b) & 1u);
  }
  return SfcIndex{index};
}

GridCoord hilbert_decode(SfcIndex index, int level) {
  check_level(level);
  if (level < kMaxLevel && index.value >= (std::uint64_t{1} << (3 * level))) {
    throw std::domain_error("hilbert index outside [0, 8^level)");
  }
  std::array<std::uint32_t, 3> x{0, 0, 0};
  int shift = 3 * level - 1;
  for (int b = level - 1; b >= 0; --b) {
    for (int d = 0; d < 3; ++d, --shift) {
      x[d] |= static_cast<std::uint32_t>((index.value >> shift) & 1u) << b;
    }
  }
  transpose_to_axes(x, level);
  return GridCoord{x[0], x[1], x[2], level};
}

GridCoord quantize(const Vec3& point, const Box& box, int level) {
  check_level(level);
  const double cells = std::ldexp(1.0, level);
  std::array<std::uint32_t, 3> c{0, 0, 0};
  for (int d = 0; d < 3; ++d) {
    const double lo = box.lo[d];
    const double extent = box.hi[d] - lo;
    const double slack = 1e-12 * std::max(1.0, std::abs(extent));
    if (!(point[d] >= lo - slack && point[d] <= box.hi[d] + slack)) {
      throw std::domain_error("point outside the bounding box on axis " + std::to_string(d));
    }
    if (extent <= 0.0) continue;
    const double f = std::floor((point[d] - lo) / extent * cells);
    c[d] = static_cast<std::uint32_t>(std::clamp(f, 0.0, cells - 1.0));
  }
  return GridCoord{c[0], c[1], c[2], level};
}

std::vector<std::size_t> sfc_sort_permutation(std::span<const Vec3> barycenters, const Box& box,
                                              int level) {
  std::vector<std::uint64_t> keys(barycenters.size());
  for (std::size_t e = 0; e < barycenters.size(); ++e) {
    keys[e] = hilbert_encode(quantize(barycenters[e], box, level)).value;
  }
  std::vector<std::size_t> perm(barycenters.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  return perm;
}

}  // namespace sfcb::sfc
