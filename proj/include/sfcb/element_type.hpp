#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

#include "sfcb/geometry.hpp"

namespace sfcb {

enum class ElementType : std::uint8_t { Hex = 0, Tet = 1, Prism = 2, Pyramid = 3 };

inline constexpr std::array<ElementType, 4> kAllElementTypes{
    ElementType::Hex, ElementType::Tet, ElementType::Prism, ElementType::Pyramid};
inline constexpr int kMaxElementNodes = 8;
inline constexpr int kMaxElementFaces = 6;

constexpr int node_count(ElementType t) {
  switch (t) {
    case ElementType::Hex: return 8;
    case ElementType::Tet: return 4;
    case ElementType::Prism: return 6;
    case ElementType::Pyramid: return 5;
  }
  return 0;
}

/// Every non-hexahedral type is advanced in modal space.
constexpr bool is_modal(ElementType t) { return t != ElementType::Hex; }

std::string_view to_string(ElementType t);
ElementType element_type_from_string(std::string_view name);

/// Face of a reference element; vertices listed cyclically.
struct FaceDef {
  int n_vertices = 0;
  std::array<int, 4> v{};
};

// Reference elements:
//   Hex      [-1,1]^3, VTK vertex order
//   Tet      unit simplex (0,0,0),(1,0,0),(0,1,0),(0,0,1)
//   Prism    unit triangle x [0,1]; vertices 0-2 at z=0, 3-5 at z=1
//   Pyramid  base [-1,1]^2 at z=0, apex (0,0,1)
std::span<const FaceDef> reference_faces(ElementType t);
std::span<const Vec3> reference_vertices(ElementType t);
double reference_volume(ElementType t);
Box reference_bounding_box(ElementType t);

/// Four affinely independent reference vertices defining the affine map.
std::array<int, 4> affine_frame(ElementType t);

}  // namespace sfcb
