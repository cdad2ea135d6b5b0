#include "sfcb/element_type.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace sfcb {
namespace {

const std::array<FaceDef, 6> kHexFaces{{
    {4, {0, 3, 7, 4}},  // x-
    {4, {1, 2, 6, 5}},  // x+
    {4, {0, 1, 5, 4}},  // y-
    {4, {3, 2, 6, 7}},  // y+
    {4, {0, 1, 2, 3}},  // z-
    {4, {4, 5, 6, 7}},  // z+
}};
const std::array<FaceDef, 4> kTetFaces{{
    {3, {1, 2, 3, 0}},
    {3, {0, 2, 3, 0}},
    {3, {0, 1, 3, 0}},
    {3, {0, 1, 2, 0}},
}};
const std::array<FaceDef, 5> kPrismFaces{{
    {3, {0, 1, 2, 0}},
    {3, {3, 4, 5, 0}},
    {4, {0, 1, 4, 3}},
    {4, {1, 2, 5, 4}},
    {4, {2, 0, 3, 5}},
}};
const std::array<FaceDef, 5> kPyramidFaces{{
    {4, {0, 1, 2, 3}},
    {3, {0, 1, 4, 0}},
    {3, {1, 2, 4, 0}},
    {3, {2, 3, 4, 0}},
    {3, {3, 0, 4, 0}},
}};

const std::vector<Vec3>& hex_vertices() {
  static const std::vector<Vec3> v{{-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
                                   {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1}};
  return v;
}
const std::vector<Vec3>& tet_vertices() {
  static const std::vector<Vec3> v{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  return v;
}
const std::vector<Vec3>& prism_vertices() {
  static const std::vector<Vec3> v{{0, 0, 0}, {1, 0, 0}, {0, 1, 0},
                                   {0, 0, 1}, {1, 0, 1}, {0, 1, 1}};
  return v;
}
const std::vector<Vec3>& pyramid_vertices() {
  static const std::vector<Vec3> v{{-1, -1, 0}, {1, -1, 0}, {1, 1, 0}, {-1, 1, 0}, {0, 0, 1}};
  return v;
}

}  // namespace

std::string_view to_string(ElementType t) {
  switch (t) {
    case ElementType::Hex: return "hex";
    case ElementType::Tet: return "tet";
    case ElementType::Prism: return "prism";
    case ElementType::Pyramid: return "pyramid";
  }
  return "unknown";
}

ElementType element_type_from_string(std::string_view name) {
  for (auto t : kAllElementTypes) {
    if (to_string(t) == name) return t;
  }
  throw std::invalid_argument("unknown element type '" + std::string(name) + "'");
}

std::span<const FaceDef> reference_faces(ElementType t) {
  switch (t) {
    case ElementType::Hex: return kHexFaces;
    case ElementType::Tet: return kTetFaces;
    case ElementType::Prism: return kPrismFaces;
    case ElementType::Pyramid: return kPyramidFaces;
  }
  return {};
}

std::span<const Vec3> reference_vertices(ElementType t) {
  switch (t) {
    case ElementType::Hex: return hex_vertices();
    case ElementType::Tet: return tet_vertices();
    case ElementType::Prism: return prism_vertices();
    case ElementType::Pyramid: return pyramid_vertices();
  }
  return {};
}

double reference_volume(ElementType t) {
  switch (t) {
    case ElementType::Hex: return 8.0;
    case ElementType::Tet: return 1.0 / 6.0;
    case ElementType::Prism: return 0.5;
    case ElementType::Pyramid: return 4.0 / 3.0;
  }
  return 0.0;
}

Box reference_bounding_box(ElementType t) {
  switch (t) {
    case ElementType::Hex: return Box{Vec3(-1, -1, -1), Vec3(1, 1, 1)};
    case ElementType::Tet:
    case ElementType::Prism: return Box{Vec3(0, 0, 0), Vec3(1, 1, 1)};
    case ElementType::Pyramid: return Box{Vec3(-1, -1, 0), Vec3(1, 1, 1)};
  }
  return {};
}

std::array<int, 4> affine_frame(ElementType t) {
  switch (t) {
    case ElementType::Hex: return {0, 1, 3, 4};
    case ElementType::Tet: return {0, 1, 2, 3};
    case ElementType::Prism: return {0, 1, 2, 3};
    case ElementType::Pyramid: return {0, 1, 3, 4};
  }
  return {0, 1, 2, 3};
}

}  // namespace sfcb
