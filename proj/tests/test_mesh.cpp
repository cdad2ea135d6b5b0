#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "sfcb/errors.hpp"
#include "sfcb/mesh.hpp"
#include "sfcb/mesh_io.hpp"

using namespace sfcb;

namespace {

double total_volume(const Mesh& m) {
  double v = 0.0;
  for (const auto& el : m.elements) v += element_volume(m, el);
  return v;
}

std::size_t internal_sides(const Mesh& m) {
  std::size_t n = 0;
  for (const auto& s : m.sides) n += (!s.is_boundary() && !s.periodic) ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("box mesh sizes") {
  const Mesh m = generate_box_mesh(8, 8, 8, Box{});
  CHECK(m.n_elements() == 512);
  CHECK(m.sides.size() == 512 * 3);
  CHECK(total_volume(m) == doctest::Approx(1.0).epsilon(1e-13));
  validate_mesh(m);
  CHECK_THROWS_AS(generate_box_mesh(0, 1, 1, Box{}), std::invalid_argument);
}

TEST_CASE("single periodic hex pairs its opposite faces") {
  const Mesh m = generate_box_mesh(1, 1, 1, Box{});
  REQUIRE(m.sides.size() == 3);
  for (const auto& s : m.sides) {
    CHECK(s.periodic);
    CHECK(s.master_elem == 0);
    CHECK(s.slave_elem == 0);
    CHECK(s.master_face % 2 == 0);
    CHECK(s.slave_face == s.master_face + 1);
  }
}

TEST_CASE("2x2x2 box is ordered along the level-1 curve") {
  const Mesh m = generate_box_mesh(2, 2, 2, Box{});
  for (std::uint64_t h = 0; h < 8; ++h) {
    const auto c = sfc::hilbert_decode({h}, 1);
    const Vec3 b = m.elements[h].barycenter;
    CHECK(std::floor(2 * b.x()) == c.i);
    CHECK(std::floor(2 * b.y()) == c.j);
    CHECK(std::floor(2 * b.z()) == c.k);
  }
}

TEST_CASE("interior side master is the lower element") {
  const Mesh m = generate_box_mesh(2, 1, 1, Box{});
  std::size_t interior = 0;
  for (const auto& s : m.sides) {
    if (s.periodic) continue;
    ++interior;
    CHECK(s.master_elem == 0);
    CHECK(s.slave_elem == 1);
  }
  CHECK(interior == 1);
}

TEST_CASE("splitting templates") {
  const Mesh hex = generate_box_mesh(1, 1, 1, Box{});
  SUBCASE("zero fraction is the identity") {
    CHECK(meshes_identical(split_to_mixed(hex, 0.0, TemplateMix{}), hex));
  }
  SUBCASE("two prisms") {
    const std::vector<SplitTemplate> t{SplitTemplate::Prisms};
    const Mesh m = split_to_mixed(hex, t);
    CHECK(m.count_by_type()[2] == 2);
    CHECK(total_volume(m) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(internal_sides(m) == 1);
  }
  SUBCASE("six tets share six internal faces") {
    const std::vector<SplitTemplate> t{SplitTemplate::Tets};
    const Mesh m = split_to_mixed(hex, t);
    CHECK(m.count_by_type()[1] == 6);
    CHECK(internal_sides(m) == 6);
    CHECK(m.sides.size() == 12);
    CHECK(std::abs(total_volume(m) - 1.0) < 1e-12);
    validate_mesh(m);
  }
  SUBCASE("six pyramids around the centre") {
    const std::vector<SplitTemplate> t{SplitTemplate::Pyramids};
    const Mesh m = split_to_mixed(hex, t);
    CHECK(m.count_by_type()[3] == 6);
    CHECK(internal_sides(m) == 12);
    CHECK(std::abs(total_volume(m) - 1.0) < 1e-12);
  }
  SUBCASE("non-hex elements cannot be split") {
    const Mesh tets = split_to_mixed(hex, std::vector<SplitTemplate>{SplitTemplate::Tets});
    std::vector<SplitTemplate> t(tets.n_elements(), SplitTemplate::Keep);
    t[0] = SplitTemplate::Prisms;
    CHECK_THROWS_AS(split_to_mixed(tets, t), std::domain_error);
  }
}

TEST_CASE("quarter preset reproduces the mixed mesh counts") {
  const Mesh base = generate_box_mesh(8, 8, 8, Box{});
  const Mesh m = split_to_mixed(base, quarter_assignment(base));
  const auto c = m.count_by_type();
  CHECK(m.n_elements() == 1984);
  CHECK(c[0] == 128);
  CHECK(c[1] == 896);
  CHECK(c[2] == 256);
  CHECK(c[3] == 704);
  CHECK(std::abs(total_volume(m) - 1.0) < 1e-12);
  validate_mesh(m);
  std::set<std::pair<int, int>> faces;
  for (const auto& s : m.sides) {
    REQUIRE_FALSE(s.is_boundary());
    CHECK(faces.insert({s.master_elem, s.master_face}).second);
    CHECK(faces.insert({s.slave_elem, s.slave_face}).second);
  }
  std::size_t n_faces = 0;
  for (const auto& el : m.elements) n_faces += reference_faces(el.type).size();
  CHECK(faces.size() == n_faces);
}

TEST_CASE("mixed split via fraction and mix") {
  const Mesh base = generate_box_mesh(4, 4, 4, Box{});
  const Mesh m = split_to_mixed(base, 0.75, TemplateMix{1, 1, 1});
  CHECK(std::abs(total_volume(m) - 1.0) < 1e-12);
  validate_mesh(m);
  CHECK_THROWS_AS(split_to_mixed(base, 1.5, TemplateMix{}), std::invalid_argument);
}

TEST_CASE("mesh file roundtrip") {
  const auto dir = std::filesystem::temp_directory_path() / "sfcb_test_mesh";
  std::filesystem::create_directories(dir);
  const Mesh hex = generate_box_mesh(8, 8, 8, Box{});
  const Mesh mixed = split_to_mixed(hex, quarter_assignment(hex));
  for (const Mesh* m : {&hex, &mixed}) {
    const auto path = dir / "m.bin";
    write_mesh(*m, path);
    const Mesh back = read_mesh(path);
    CHECK(meshes_identical(*m, back));
    CHECK(back.elem_sides == m->elem_sides);
  }
  write_mesh_sidecar(mixed, dir / "m.json");
  CHECK(std::filesystem::file_size(dir / "m.json") > 0);
}

TEST_CASE("malformed mesh files") {
  const auto bytes = serialize_mesh(generate_box_mesh(2, 2, 2, Box{}));
  SUBCASE("truncated") {
    for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{40}, bytes.size() / 2, bytes.size() - 1}) {
      std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<long>(cut));
      CHECK_THROWS_AS(deserialize_mesh(part), ParseError);
    }
  }
  SUBCASE("corrupted payload") {
    auto bad = bytes;
    bad[bad.size() / 2] ^= 0x40;
    CHECK_THROWS_AS(deserialize_mesh(bad), ParseError);
  }
  SUBCASE("bad magic") {
    auto bad = bytes;
    bad[0] = 'X';
    try {
      deserialize_mesh(bad);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.offset() == 0);
    }
  }
}
