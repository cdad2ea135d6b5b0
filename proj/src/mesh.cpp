#include "sfcb/mesh.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

#include "sfcb/errors.hpp"

namespace sfcb {
namespace {

enum class FaceState : std::uint8_t { Quad, Tri, Adaptive };

Vec3 vertex_average(const Mesh& mesh, std::span<const NodeId> ids) {
  Vec3 c = Vec3::Zero();
  for (auto id : ids) c += mesh.nodes[id];
  return c / static_cast<double>(ids.size());
}

void finalize_element(const Mesh& mesh, Element& el) {
  el.barycenter = vertex_average(mesh, el.node_ids());
  el.jacobian = element_affine_map(mesh, el).det;
  if (!(el.jacobian > 0.0)) throw MeshError("element with non-positive jacobian");
}

// Reorders vertices so the affine map has positive determinant.
void orient_positive(const Mesh& mesh, Element& el) {
  const auto frame = affine_frame(el.type);
  const auto ref = reference_vertices(el.type);
  Eigen::Matrix3d p, r;
  for (int c = 0; c < 3; ++c) {
    p.col(c) = mesh.nodes[el.nodes[frame[c + 1]]] - mesh.nodes[el.nodes[frame[0]]];
    r.col(c) = ref[frame[c + 1]] - ref[frame[0]];
  }
  if ((p * r.inverse()).determinant() > 0.0) return;
  switch (el.type) {
    case ElementType::Tet: std::swap(el.nodes[1], el.nodes[2]); break;
    case ElementType::Prism:
      std::swap(el.nodes[1], el.nodes[2]);
      std::swap(el.nodes[4], el.nodes[5]);
      break;
    case ElementType::Pyramid: std::swap(el.nodes[1], el.nodes[3]); break;
    case ElementType::Hex:
      std::swap(el.nodes[1], el.nodes[3]);
      std::swap(el.nodes[5], el.nodes[7]);
      break;
  }
}

Element make_element(const Mesh& mesh, ElementType type, std::initializer_list<NodeId> ids) {
  Element el;
  el.type = type;
  std::copy(ids.begin(), ids.end(), el.nodes.begin());
  orient_positive(mesh, el);
  finalize_element(mesh, el);
  return el;
}

// Stable SFC sort of elements by barycenter; assigns sfc_index.
void sort_along_sfc(Mesh& mesh) {
  std::vector<Vec3> centers(mesh.elements.size());
  for (std::size_t e = 0; e < centers.size(); ++e) centers[e] = mesh.elements[e].barycenter;
  const auto perm = sfc::sfc_sort_permutation(centers, mesh.box, mesh.sfc_level);
  std::vector<Element> sorted;
  sorted.reserve(perm.size());
  for (auto p : perm) {
    Element el = mesh.elements[p];
    el.sfc_index = sfc::hilbert_encode(sfc::quantize(el.barycenter, mesh.box, mesh.sfc_level));
    sorted.push_back(el);
  }
  mesh.elements = std::move(sorted);
}

struct FaceRef {
  std::int32_t elem;
  std::int8_t face;
};

std::array<NodeId, 4> face_nodes(const Element& el, int f) {
  const auto& def = reference_faces(el.type)[f];
  std::array<NodeId, 4> ids{};
  for (int i = 0; i < def.n_vertices; ++i) ids[i] = el.nodes[def.v[i]];
  return ids;
}

int face_vertex_count(const Element& el, int f) { return reference_faces(el.type)[f].n_vertices; }

struct BoundaryFace {
  FaceRef ref;
  int axis = -1;
  bool high = false;
  Vec3 centroid;
};

}  // namespace

std::array<std::size_t, 4> Mesh::count_by_type() const {
  std::array<std::size_t, 4> counts{};
  for (const auto& el : elements) ++counts[static_cast<int>(el.type)];
  return counts;
}

std::vector<std::size_t> Mesh::side_to_elem() const {
  std::vector<std::size_t> map(sides.size());
  for (std::size_t s = 0; s < sides.size(); ++s) map[s] = static_cast<std::size_t>(sides[s].master_elem);
  return map;
}

AffineMap element_affine_map(const Mesh& mesh, const Element& element) {
  const auto frame = affine_frame(element.type);
  const auto ref = reference_vertices(element.type);
  Eigen::Matrix3d p, r;
  for (int c = 0; c < 3; ++c) {
    p.col(c) = mesh.nodes[element.nodes[frame[c + 1]]] - mesh.nodes[element.nodes[frame[0]]];
    r.col(c) = ref[frame[c + 1]] - ref[frame[0]];
  }
  AffineMap map;
  map.origin_ref = ref[frame[0]];
  map.origin_phys = mesh.nodes[element.nodes[frame[0]]];
  map.a = p * r.inverse();
  map.det = map.a.determinant();
  const double scale = p.cwiseAbs().maxCoeff();
  for (int v = 0; v < node_count(element.type); ++v) {
    const Vec3 err = map.to_physical(ref[v]) - mesh.nodes[element.nodes[v]];
    if (err.norm() > 1e-10 * scale) throw MeshError("element is not an affine image of its reference");
  }
  return map;
}

double element_volume(const Mesh& mesh, const Element& element) {
  return element_affine_map(mesh, element).det * reference_volume(element.type);
}

Mesh generate_box_mesh(int nx, int ny, int nz, const Box& box, int sfc_level) {
  if (nx < 1 || ny < 1 || nz < 1) throw std::invalid_argument("box mesh dimensions must be >= 1");
  if ((box.extent().array() <= 0.0).any()) throw std::invalid_argument("box must have positive extent");
  Mesh mesh;
  mesh.box = box;
  mesh.periodic = true;
  mesh.sfc_level = sfc_level;
  const Vec3 h = box.extent().cwiseQuotient(Vec3(nx, ny, nz));
  mesh.nodes.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1) * (nz + 1));
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i) {
        // Pin the last lattice plane to hi exactly so periodic partners line up.
        Vec3 x = box.lo + Vec3(i * h.x(), j * h.y(), k * h.z());
        if (i == nx) x.x() = box.hi.x();
        if (j == ny) x.y() = box.hi.y();
        if (k == nz) x.z() = box.hi.z();
        mesh.nodes.push_back(x);
      }
  auto node = [&](int i, int j, int k) {
    return static_cast<NodeId>(i + (nx + 1) * (j + (ny + 1) * k));
  };
  mesh.elements.reserve(static_cast<std::size_t>(nx) * ny * nz);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        mesh.elements.push_back(make_element(
            mesh, ElementType::Hex,
            {node(i, j, k), node(i + 1, j, k), node(i + 1, j + 1, k), node(i, j + 1, k),
             node(i, j, k + 1), node(i + 1, j, k + 1), node(i + 1, j + 1, k + 1), node(i, j + 1, k + 1)}));
      }
  sort_along_sfc(mesh);
  return build_side_connectivity(std::move(mesh));
}

Mesh build_side_connectivity(Mesh mesh) {
  const std::size_t n_elem = mesh.elements.size();
  if (n_elem == 0) throw MeshError("mesh has no elements");
  const double tol = 1e-9 * mesh.box.diagonal();

  std::map<std::array<NodeId, 5>, FaceRef> open;
  std::vector<Side> sides;
  auto make_side = [&](FaceRef master, FaceRef slave, const std::array<NodeId, 4>& slave_ids, bool periodic) {
    Side s;
    const Element& m = mesh.elements[master.elem];
    s.n_nodes = static_cast<std::uint8_t>(face_vertex_count(m, master.face));
    s.node_ids = face_nodes(m, master.face);
    s.slave_node_ids = slave_ids;
    s.master_elem = master.elem;
    s.master_face = master.face;
    s.slave_elem = slave.elem;
    s.slave_face = slave.face;
    s.periodic = periodic;
    sides.push_back(s);
  };

  for (std::size_t e = 0; e < n_elem; ++e) {
    const Element& el = mesh.elements[e];
    const int nf = static_cast<int>(reference_faces(el.type).size());
    for (int f = 0; f < nf; ++f) {
      const int nv = face_vertex_count(el, f);
      auto ids = face_nodes(el, f);
      std::array<NodeId, 5> key{};
      key.fill(~NodeId{0});
      std::copy_n(ids.begin(), nv, key.begin());
      std::sort(key.begin(), key.begin() + nv);
      key[4] = static_cast<NodeId>(nv);
      FaceRef here{static_cast<std::int32_t>(e), static_cast<std::int8_t>(f)};
      auto [it, inserted] = open.try_emplace(key, here);
      if (inserted) continue;
      if (it->second.elem < 0) throw MeshError("face shared by more than two elements");
      // Earlier element is the master; map its vertex order onto our node ids.
      const FaceRef master = it->second;
      make_side(master, here, face_nodes(mesh.elements[master.elem], master.face), false);
      it->second.elem = -1;
    }
  }

  std::vector<BoundaryFace> boundary;
  for (const auto& [key, ref] : open) {
    if (ref.elem < 0) continue;
    const Element& el = mesh.elements[ref.elem];
    const int nv = face_vertex_count(el, ref.face);
    const auto ids = face_nodes(el, ref.face);
    BoundaryFace bf;
    bf.ref = ref;
    bf.centroid = vertex_average(mesh, std::span<const NodeId>(ids.data(), nv));
    for (int d = 0; d < 3; ++d) {
      bool on_lo = true, on_hi = true;
      for (int i = 0; i < nv; ++i) {
        on_lo = on_lo && std::abs(mesh.nodes[ids[i]][d] - mesh.box.lo[d]) <= tol;
        on_hi = on_hi && std::abs(mesh.nodes[ids[i]][d] - mesh.box.hi[d]) <= tol;
      }
      if (on_lo || on_hi) {
        bf.axis = d;
        bf.high = on_hi;
      }
    }
    if (bf.axis < 0) throw MeshError("unmatched interior face of element " + std::to_string(ref.elem));
    boundary.push_back(bf);
  }

  if (mesh.periodic) {
    for (int d = 0; d < 3; ++d) {
      const int d1 = (d + 1) % 3, d2 = (d + 2) % 3;
      std::vector<const BoundaryFace*> lo, hi;
      for (const auto& bf : boundary) {
        if (bf.axis != d) continue;
        (bf.high ? hi : lo).push_back(&bf);
      }
      if (lo.size() != hi.size()) throw MeshError("periodic boundary faces do not pair up on axis " + std::to_string(d));
      auto less = [&](const BoundaryFace* a, const BoundaryFace* b) {
        if (a->centroid[d1] != b->centroid[d1]) return a->centroid[d1] < b->centroid[d1];
        return a->centroid[d2] < b->centroid[d2];
      };
      std::sort(lo.begin(), lo.end(), less);
      std::vector<bool> used(lo.size(), false);
      const double length = mesh.box.hi[d] - mesh.box.lo[d];
      for (const BoundaryFace* h : hi) {
        auto first = std::lower_bound(lo.begin(), lo.end(), h->centroid[d1] - tol,
                                      [&](const BoundaryFace* a, double v) { return a->centroid[d1] < v; });
        const BoundaryFace* partner = nullptr;
        std::size_t partner_pos = 0;
        for (auto it = first; it != lo.end() && (*it)->centroid[d1] <= h->centroid[d1] + tol; ++it) {
          const auto pos = static_cast<std::size_t>(it - lo.begin());
          if (used[pos] || std::abs((*it)->centroid[d2] - h->centroid[d2]) > tol) continue;
          const Element& el_lo = mesh.elements[(*it)->ref.elem];
          const Element& el_hi = mesh.elements[h->ref.elem];
          if (face_vertex_count(el_lo, (*it)->ref.face) != face_vertex_count(el_hi, h->ref.face)) continue;
          partner = *it;
          partner_pos = pos;
          break;
        }
        if (!partner) throw MeshError("no periodic partner for boundary face of element " + std::to_string(h->ref.elem));
        used[partner_pos] = true;

        // Master: lower element index; for a self-periodic element the low face.
        const bool lo_is_master = partner->ref.elem <= h->ref.elem;
        const BoundaryFace* master = lo_is_master ? partner : h;
        const BoundaryFace* slave = lo_is_master ? h : partner;
        const Element& em = mesh.elements[master->ref.elem];
        const Element& es = mesh.elements[slave->ref.elem];
        const int nv = face_vertex_count(em, master->ref.face);
        const auto mids = face_nodes(em, master->ref.face);
        const auto sids = face_nodes(es, slave->ref.face);
        Vec3 shift = Vec3::Zero();
        shift[d] = lo_is_master ? length : -length;
        std::array<NodeId, 4> slave_ids{};
        for (int i = 0; i < nv; ++i) {
          const Vec3 target = mesh.nodes[mids[i]] + shift;
          int found = -1;
          for (int j = 0; j < nv; ++j) {
            if ((mesh.nodes[sids[j]] - target).norm() <= tol) found = j;
          }
          if (found < 0) throw MeshError("periodic faces are not translates of each other");
          slave_ids[i] = sids[found];
        }
        make_side(master->ref, slave->ref, slave_ids, true);
      }
    }
  } else {
    for (const auto& bf : boundary) {
      make_side(bf.ref, FaceRef{kNoElement, -1}, {}, false);
    }
  }

  std::sort(sides.begin(), sides.end(), [](const Side& a, const Side& b) {
    if (a.master_elem != b.master_elem) return a.master_elem < b.master_elem;
    return a.master_face < b.master_face;
  });
  mesh.sides = std::move(sides);
  mesh.elem_sides.assign(n_elem, {});
  for (auto& row : mesh.elem_sides) row.fill(-1);
  for (std::size_t s = 0; s < mesh.sides.size(); ++s) {
    const Side& side = mesh.sides[s];
    mesh.elem_sides[side.master_elem][side.master_face] = static_cast<std::int32_t>(s);
    if (!side.is_boundary()) mesh.elem_sides[side.slave_elem][side.slave_face] = static_cast<std::int32_t>(s);
  }
  return mesh;
}

namespace {

constexpr std::array<std::array<int, 4>, 6> kKuhnTets{{
    {0, 1, 2, 6}, {0, 2, 3, 6}, {0, 3, 7, 6}, {0, 7, 4, 6}, {0, 4, 5, 6}, {0, 5, 1, 6}}};
constexpr std::array<std::array<int, 6>, 2> kPrismPair{{{0, 1, 2, 4, 5, 6}, {0, 2, 3, 4, 6, 7}}};

FaceState fixed_face_state(SplitTemplate t, int local_face) {
  switch (t) {
    case SplitTemplate::Keep: return FaceState::Quad;
    case SplitTemplate::Tets: return FaceState::Tri;
    case SplitTemplate::Prisms: return local_face >= 4 ? FaceState::Tri : FaceState::Quad;
    case SplitTemplate::Pyramids: return FaceState::Adaptive;
  }
  return FaceState::Quad;
}

void check_axis_aligned_hex(const Mesh& mesh, const Element& el) {
  const Vec3& p0 = mesh.nodes[el.nodes[0]];
  const Vec3& p6 = mesh.nodes[el.nodes[6]];
  const auto ref = reference_vertices(ElementType::Hex);
  const double tol = 1e-9 * (p6 - p0).norm();
  for (int v = 0; v < 8; ++v) {
    Vec3 expect;
    for (int d = 0; d < 3; ++d) expect[d] = ref[v][d] < 0 ? p0[d] : p6[d];
    if ((mesh.nodes[el.nodes[v]] - expect).norm() > tol) {
      throw std::domain_error("hex splitting requires axis-aligned hexes with vertex 0 at the min corner");
    }
  }
}

}  // namespace

Mesh split_to_mixed(const Mesh& mesh, std::span<const SplitTemplate> templates) {
  if (templates.size() != mesh.elements.size()) throw std::invalid_argument("one split template per element required");
  std::vector<SplitTemplate> tmpl(templates.begin(), templates.end());
  for (std::size_t e = 0; e < tmpl.size(); ++e) {
    if (tmpl[e] == SplitTemplate::Keep) continue;
    if (mesh.elements[e].type != ElementType::Hex) {
      throw std::domain_error("element " + std::to_string(e) + " selected for splitting is not a hex");
    }
    check_axis_aligned_hex(mesh, mesh.elements[e]);
  }

  // Demote fixed templates whose face would not conform to a neighbour.
  for (const Side& s : mesh.sides) {
    if (s.is_boundary()) continue;
    auto& tm = tmpl[s.master_elem];
    auto& ts = tmpl[s.slave_elem];
    const auto fm = fixed_face_state(tm, s.master_face);
    const auto fs = fixed_face_state(ts, s.slave_face);
    if (fm == FaceState::Adaptive || fs == FaceState::Adaptive || fm == fs) continue;
    if (tm == SplitTemplate::Keep) {
      ts = SplitTemplate::Pyramids;
    } else if (ts == SplitTemplate::Keep) {
      tm = SplitTemplate::Pyramids;
    } else {
      (s.master_elem > s.slave_elem ? tm : ts) = SplitTemplate::Pyramids;
    }
  }

  Mesh out;
  out.nodes = mesh.nodes;
  out.box = mesh.box;
  out.periodic = mesh.periodic;
  out.sfc_level = mesh.sfc_level;
  out.elements.reserve(mesh.elements.size() * 6);

  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    const Element& hex = mesh.elements[e];
    const auto& n = hex.nodes;
    switch (tmpl[e]) {
      case SplitTemplate::Keep: out.elements.push_back(hex); break;
      case SplitTemplate::Tets:
        for (const auto& t : kKuhnTets) {
          out.elements.push_back(make_element(out, ElementType::Tet, {n[t[0]], n[t[1]], n[t[2]], n[t[3]]}));
        }
        break;
      case SplitTemplate::Prisms:
        for (const auto& p : kPrismPair) {
          out.elements.push_back(
              make_element(out, ElementType::Prism, {n[p[0]], n[p[1]], n[p[2]], n[p[3]], n[p[4]], n[p[5]]}));
        }
        break;
      case SplitTemplate::Pyramids: {
        const auto center = static_cast<NodeId>(out.nodes.size());
        out.nodes.push_back(vertex_average(mesh, hex.node_ids()));
        const auto faces = reference_faces(ElementType::Hex);
        for (int f = 0; f < 6; ++f) {
          FaceState state = FaceState::Quad;
          const std::int32_t side_id = mesh.elem_sides[e][f];
          if (side_id >= 0) {
            const Side& s = mesh.sides[side_id];
            if (!s.is_boundary()) {
              const bool is_master = s.master_elem == static_cast<std::int32_t>(e) && s.master_face == f;
              const auto other = is_master ? s.slave_elem : s.master_elem;
              const auto other_face = is_master ? s.slave_face : s.master_face;
              const auto st = fixed_face_state(tmpl[other], other_face);
              if (st != FaceState::Adaptive) state = st;
            }
          }
          std::array<NodeId, 4> v{};
          for (int i = 0; i < 4; ++i) v[i] = n[faces[f].v[i]];
          if (state == FaceState::Quad) {
            out.elements.push_back(make_element(out, ElementType::Pyramid, {v[0], v[1], v[2], v[3], center}));
            continue;
          }
          // Diagonal through the lexicographically smallest corner, as in the Kuhn split.
          int m = 0;
          for (int i = 1; i < 4; ++i) {
            const Vec3& a = out.nodes[v[i]];
            const Vec3& b = out.nodes[v[m]];
            if (std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3)) m = i;
          }
          const int o = (m + 2) % 4;
          out.elements.push_back(make_element(out, ElementType::Tet, {v[m], v[(m + 1) % 4], v[o], center}));
          out.elements.push_back(make_element(out, ElementType::Tet, {v[m], v[o], v[(m + 3) % 4], center}));
        }
        break;
      }
    }
  }
  sort_along_sfc(out);
  return build_side_connectivity(std::move(out));
}

Mesh split_to_mixed(const Mesh& mesh, double split_fraction, const TemplateMix& mix) {
  if (!(split_fraction >= 0.0 && split_fraction <= 1.0)) throw std::invalid_argument("split_fraction must lie in [0, 1]");
  if (mix.tets < 0 || mix.pyramids < 0 || mix.prisms < 0) throw std::invalid_argument("template weights must be >= 0");
  const double total_w = mix.tets + mix.pyramids + mix.prisms;
  if (split_fraction == 0.0) return mesh;
  if (!(total_w > 0.0)) throw std::invalid_argument("template mix must have a positive weight");

  std::vector<std::size_t> hexes;
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    if (mesh.elements[e].type == ElementType::Hex) hexes.push_back(e);
  }
  const auto n_split = static_cast<std::size_t>(std::llround(split_fraction * static_cast<double>(hexes.size())));
  const auto n_tet = static_cast<std::size_t>(std::llround(n_split * mix.tets / total_w));
  const auto n_pyr = static_cast<std::size_t>(std::llround(n_split * mix.pyramids / total_w));
  std::vector<SplitTemplate> tmpl(mesh.elements.size(), SplitTemplate::Keep);
  for (std::size_t i = 0; i < n_split; ++i) {
    SplitTemplate t = SplitTemplate::Prisms;
    if (i < n_tet) {
      t = SplitTemplate::Tets;
    } else if (i < n_tet + n_pyr) {
      t = SplitTemplate::Pyramids;
    }
    tmpl[hexes[i]] = t;
  }
  return split_to_mixed(mesh, tmpl);
}

std::vector<SplitTemplate> quarter_assignment(const Mesh& mesh) {
  const Vec3 center = 0.5 * (mesh.box.lo + mesh.box.hi);
  std::vector<SplitTemplate> tmpl(mesh.elements.size(), SplitTemplate::Keep);
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    const Vec3& b = mesh.elements[e].barycenter;
    const bool y_hi = b.y() >= center.y();
    const bool z_hi = b.z() >= center.z();
    if (!y_hi && !z_hi) tmpl[e] = SplitTemplate::Tets;
    else if (y_hi && !z_hi) tmpl[e] = SplitTemplate::Pyramids;
    else if (!y_hi && z_hi) tmpl[e] = SplitTemplate::Prisms;
  }
  return tmpl;
}

void validate_mesh(const Mesh& mesh) {
  for (std::size_t e = 1; e < mesh.elements.size(); ++e) {
    if (mesh.elements[e].sfc_index < mesh.elements[e - 1].sfc_index) throw MeshError("elements not sorted along the SFC");
  }
  for (const auto& el : mesh.elements) {
    if (!(el.jacobian > 0.0)) throw MeshError("non-positive jacobian");
    auto ids = el.node_ids();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] >= mesh.nodes.size()) throw MeshError("node id out of range");
      for (std::size_t j = i + 1; j < ids.size(); ++j)
        if (ids[i] == ids[j]) throw MeshError("repeated node in element");
    }
  }
  if (mesh.elem_sides.size() != mesh.elements.size()) throw MeshError("element-to-side table size mismatch");
  for (std::size_t s = 0; s < mesh.sides.size(); ++s) {
    const Side& side = mesh.sides[s];
    const auto n = static_cast<std::int32_t>(mesh.elements.size());
    if (side.master_elem < 0 || side.master_elem >= n) throw MeshError("side without a valid master");
    if (!side.is_boundary()) {
      if (side.slave_elem >= n) throw MeshError("side slave out of range");
      if (side.master_elem > side.slave_elem) throw MeshError("side master is not the lower SFC neighbour");
    }
  }
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    const int nf = static_cast<int>(reference_faces(mesh.elements[e].type).size());
    for (int f = 0; f < nf; ++f) {
      if (mesh.elem_sides[e][f] < 0) throw MeshError("element face without a side");
    }
  }
}

}  // namespace sfcb
