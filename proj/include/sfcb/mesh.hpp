#pragma once

#include <Eigen/Core>
#include <Eigen/LU>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sfcb/element_type.hpp"
#include "sfcb/geometry.hpp"
#include "sfcb/sfc.hpp"

namespace sfcb {

using NodeId = std::uint32_t;
inline constexpr std::int32_t kNoElement = -1;

struct Element {
  ElementType type = ElementType::Hex;
  std::array<NodeId, kMaxElementNodes> nodes{};
  Vec3 barycenter = Vec3::Zero();
  double jacobian = 0.0;  ///< element volume / reference volume
  sfc::SfcIndex sfc_index;

  std::span<const NodeId> node_ids() const {
    return {nodes.data(), static_cast<std::size_t>(node_count(type))};
  }
};

/// A face shared by one (boundary) or two elements.
///
/// `node_ids` follows the cyclic vertex order of the master's local face.
/// `slave_node_ids[i]` is the slave's node coinciding with `node_ids[i]`;
/// on periodic sides it is the translated partner node.
struct Side {
  std::uint8_t n_nodes = 0;
  std::array<NodeId, 4> node_ids{};
  std::array<NodeId, 4> slave_node_ids{};
  std::int32_t master_elem = kNoElement;
  std::int32_t slave_elem = kNoElement;
  std::int8_t master_face = -1;
  std::int8_t slave_face = -1;
  bool periodic = false;

  bool is_boundary() const { return slave_elem == kNoElement; }
};

struct Mesh {
  std::vector<Vec3> nodes;
  std::vector<Element> elements;  ///< ascending sfc_index
  std::vector<Side> sides;
  /// elem_sides[e][f]: side index of local face f of element e (-1 past the face count).
  std::vector<std::array<std::int32_t, kMaxElementFaces>> elem_sides;
  Box box;
  bool periodic = true;
  int sfc_level = sfc::kDefaultLevel;

  std::size_t n_elements() const { return elements.size(); }
  std::array<std::size_t, 4> count_by_type() const;
  /// Side -> element map used for cost attribution: the master element of every side.
  std::vector<std::size_t> side_to_elem() const;
};

/// x = origin_phys + a * (xi - origin_ref)
struct AffineMap {
  Vec3 origin_ref = Vec3::Zero();
  Vec3 origin_phys = Vec3::Zero();
  Eigen::Matrix3d a = Eigen::Matrix3d::Identity();
  double det = 1.0;

  Vec3 to_physical(const Vec3& xi) const { return origin_phys + a * (xi - origin_ref); }
  Vec3 to_reference(const Vec3& x) const { return origin_ref + a.inverse() * (x - origin_phys); }
};

/// Throws MeshError when the vertices are not an affine image of the reference element.
AffineMap element_affine_map(const Mesh& mesh, const Element& element);
double element_volume(const Mesh& mesh, const Element& element);

/// Structured periodic all-hex mesh, SFC sorted, sides built.
Mesh generate_box_mesh(int nx, int ny, int nz, const Box& box, int sfc_level = sfc::kDefaultLevel);

/// Matches element faces into sides (periodic across box faces when mesh.periodic).
/// Throws MeshError if a face cannot be matched.
Mesh build_side_connectivity(Mesh mesh);

enum class SplitTemplate : std::uint8_t {
  Keep,      ///< hex unchanged
  Tets,      ///< 6 tets around the main diagonal
  Pyramids,  ///< 6 face cones around an added center node; a cone whose face must be
             ///< triangulated to conform with a neighbour becomes 2 tets
  Prisms,    ///< 2 prisms extruded along z
};

struct TemplateMix {
  double tets = 1.0;
  double pyramids = 1.0;
  double prisms = 1.0;
};

/// Splits hexes according to a per-element template. Fixed templates that
/// would produce a non-conforming face are demoted to Pyramids. Throws
/// std::domain_error if a non-hex element is asked to split.
Mesh split_to_mixed(const Mesh& mesh, std::span<const SplitTemplate> templates);

/// Splits the first round(split_fraction * n) hexes along the SFC, grouping
/// them into contiguous SFC runs per template in proportion to `mix`.
Mesh split_to_mixed(const Mesh& mesh, double split_fraction, const TemplateMix& mix);

/// Cross-section quarter layout: each (y, z) quarter of the box becomes one
/// element type (tets, pyramids, prisms, hexes).
std::vector<SplitTemplate> quarter_assignment(const Mesh& mesh);

/// Checks the Mesh invariants; throws MeshError on the first violation.
void validate_mesh(const Mesh& mesh);

}  // namespace sfcb
