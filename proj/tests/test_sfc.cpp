#include <doctest.h>

#include <cstdlib>
#include <numeric>
#include <set>
#include <stdexcept>

#include "sfcb/sfc.hpp"

using namespace sfcb;
using namespace sfcb::sfc;

TEST_CASE("origin maps to index zero") {
  CHECK(hilbert_encode({0, 0, 0, 1}).value == 0);
  CHECK(hilbert_decode({0}, 1) == GridCoord{0, 0, 0, 1});
}

TEST_CASE("encode is a bijection and consecutive cells are face neighbours") {
  for (int level = 1; level <= 4; ++level) {
    const std::uint32_t side = 1u << level;
    std::vector<bool> hit(std::size_t{1} << (3 * level), false);
    for (std::uint32_t k = 0; k < side; ++k)
      for (std::uint32_t j = 0; j < side; ++j)
        for (std::uint32_t i = 0; i < side; ++i) {
          const auto idx = hilbert_encode({i, j, k, level}).value;
          REQUIRE(idx < hit.size());
          REQUIRE_FALSE(hit[idx]);
          hit[idx] = true;
          CHECK(hilbert_decode({idx}, level) == GridCoord{i, j, k, level});
        }
    for (std::uint64_t h = 0; h + 1 < hit.size(); ++h) {
      const auto a = hilbert_decode({h}, level);
      const auto b = hilbert_decode({h + 1}, level);
      const long dist = std::labs(long(a.i) - long(b.i)) + std::labs(long(a.j) - long(b.j)) +
                        std::labs(long(a.k) - long(b.k));
      REQUIRE(dist == 1);
    }
  }
}

TEST_CASE("coarse index is the prefix of the fine index") {
  for (std::uint32_t k = 0; k < 8; ++k)
    for (std::uint32_t j = 0; j < 8; ++j)
      for (std::uint32_t i = 0; i < 8; ++i) {
        const auto fine = hilbert_encode({i, j, k, 3}).value;
        const auto coarse = hilbert_encode({i / 4, j / 4, k / 4, 1}).value;
        CHECK((fine >> 6) == coarse);
      }
}

TEST_CASE("out of range input raises domain_error") {
  CHECK_THROWS_AS(hilbert_encode({2, 0, 0, 1}), std::domain_error);
  CHECK_THROWS_AS(hilbert_encode({0, 0, 0, 0}), std::domain_error);
  CHECK_THROWS_AS(hilbert_encode({0, 0, 0, kMaxLevel + 1}), std::domain_error);
  CHECK_THROWS_AS(hilbert_decode({8}, 1), std::domain_error);
  const Box box;
  CHECK_THROWS_AS(quantize(Vec3(1.5, 0.5, 0.5), box, 3), std::domain_error);
}

TEST_CASE("quantize clamps the upper face and flattens degenerate axes") {
  Box box{Vec3(0, 0, 0), Vec3(1, 1, 0)};
  const auto c = quantize(Vec3(1.0, 0.25, 0.0), box, 2);
  CHECK(c.i == 3);
  CHECK(c.j == 1);
  CHECK(c.k == 0);
}

TEST_CASE("sort permutation") {
  const Box box;
  SUBCASE("single point") {
    std::vector<Vec3> pts{Vec3(0.3, 0.3, 0.3)};
    CHECK(sfc_sort_permutation(pts, box, 4) == std::vector<std::size_t>{0});
  }
  SUBCASE("2x2x2 cell centres follow the level-1 visit order") {
    std::vector<Vec3> pts;
    for (int k = 0; k < 2; ++k)
      for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) pts.emplace_back(0.25 + 0.5 * i, 0.25 + 0.5 * j, 0.25 + 0.5 * k);
    const auto perm = sfc_sort_permutation(pts, box, 1);
    for (std::uint64_t h = 0; h < 8; ++h) {
      const auto c = hilbert_decode({h}, 1);
      CHECK(perm[h] == c.i + 2 * c.j + 4 * c.k);
    }
    std::vector<Vec3> sorted;
    for (auto p : perm) sorted.push_back(pts[p]);
    std::vector<std::size_t> identity(8);
    std::iota(identity.begin(), identity.end(), 0);
    CHECK(sfc_sort_permutation(sorted, box, 1) == identity);
  }
  SUBCASE("ties keep input order") {
    std::vector<Vec3> pts{Vec3(0.1, 0.1, 0.1), Vec3(0.2, 0.2, 0.2), Vec3(0.15, 0.1, 0.1)};
    CHECK(sfc_sort_permutation(pts, box, 1) == std::vector<std::size_t>{0, 1, 2});
  }
  SUBCASE("point outside the box") {
    std::vector<Vec3> pts{Vec3(-0.5, 0.1, 0.1)};
    CHECK_THROWS_AS(sfc_sort_permutation(pts, box, 2), std::domain_error);
  }
}
