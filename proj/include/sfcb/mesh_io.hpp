#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sfcb/mesh.hpp"

// Binary mesh container, little-endian:
//
//   "SFCBMESH" u32 version u32 flags(bit0 periodic) i32 sfc_level
//   f64[6] box  u64 n_nodes  u64 count[4] (hex, tet, prism, pyramid)  u64 n_sides
//   nodes: f64[3] each
//   for each type: records of u64 position, u32 nodes[node_count],
//                  f64[3] barycenter, f64 jacobian, u64 sfc_index
//   sides: u8 n_nodes, u8 flags, i8 master_face, i8 slave_face,
//          i32 master_elem, i32 slave_elem, u32[4] node_ids, u32[4] slave_node_ids
//   u64 FNV-1a of every preceding byte

namespace sfcb {

inline constexpr std::uint32_t kMeshFormatVersion = 1;

std::vector<std::uint8_t> serialize_mesh(const Mesh& mesh);
/// Throws ParseError (with byte offset) on malformed input; never returns a partial mesh.
Mesh deserialize_mesh(std::span<const std::uint8_t> bytes);

void write_mesh(const Mesh& mesh, const std::filesystem::path& path);
Mesh read_mesh(const std::filesystem::path& path);

/// Human-readable summary written next to a binary mesh.
void write_mesh_sidecar(const Mesh& mesh, const std::filesystem::path& path);

/// True when both meshes serialize to identical bytes.
bool meshes_identical(const Mesh& a, const Mesh& b);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed = 0xcbf29ce484222325ull);

}  // namespace sfcb
