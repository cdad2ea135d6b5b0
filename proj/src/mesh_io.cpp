#include "sfcb/mesh_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <string>

#include "sfcb/errors.hpp"

static_assert(std::endian::native == std::endian::little, "mesh I/O assumes a little-endian host");

namespace sfcb {
namespace {

constexpr char kMagic[8] = {'S', 'F', 'C', 'B', 'M', 'E', 'S', 'H'};

class Writer {
 public:
  template <class T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_vec(const Vec3& v) {
    for (int d = 0; d < 3; ++d) put(v[d]);
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <class T>
  T get(const char* what) {
    if (bytes_.size() - pos_ < sizeof(T)) throw ParseError(std::string("truncated file reading ") + what, pos_);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  Vec3 get_vec(const char* what) {
    Vec3 v;
    for (int d = 0; d < 3; ++d) v[d] = get<double>(what);
    return v;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<std::uint8_t> serialize_mesh(const Mesh& mesh) {
  Writer w;
  for (char c : kMagic) w.put(c);
  w.put(kMeshFormatVersion);
  w.put(static_cast<std::uint32_t>(mesh.periodic ? 1 : 0));
  w.put(static_cast<std::int32_t>(mesh.sfc_level));
  w.put_vec(mesh.box.lo);
  w.put_vec(mesh.box.hi);
  w.put(static_cast<std::uint64_t>(mesh.nodes.size()));
  const auto counts = mesh.count_by_type();
  for (auto c : counts) w.put(static_cast<std::uint64_t>(c));
  w.put(static_cast<std::uint64_t>(mesh.sides.size()));
  for (const auto& x : mesh.nodes) w.put_vec(x);
  for (auto type : kAllElementTypes) {
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
      const Element& el = mesh.elements[e];
      if (el.type != type) continue;
      w.put(static_cast<std::uint64_t>(e));
      for (auto id : el.node_ids()) w.put(id);
      w.put_vec(el.barycenter);
      w.put(el.jacobian);
      w.put(el.sfc_index.value);
    }
  }
  for (const Side& s : mesh.sides) {
    w.put(s.n_nodes);
    w.put(static_cast<std::uint8_t>(s.periodic ? 1 : 0));
    w.put(s.master_face);
    w.put(s.slave_face);
    w.put(s.master_elem);
    w.put(s.slave_elem);
    for (auto id : s.node_ids) w.put(id);
    for (auto id : s.slave_node_ids) w.put(id);
  }
  const auto sum = fnv1a64(w.bytes());
  w.put(sum);
  return std::move(w.bytes());
}

Mesh deserialize_mesh(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  for (char c : kMagic) {
    if (r.get<char>("magic") != c) throw ParseError("bad magic", r.pos() - 1);
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kMeshFormatVersion) throw ParseError("unsupported version " + std::to_string(version), r.pos() - 4);
  if (bytes.size() < 8) throw ParseError("truncated file", bytes.size());
  const std::size_t body = bytes.size() - 8;

  Mesh mesh;
  const auto flags = r.get<std::uint32_t>("flags");
  if (flags > 1) throw ParseError("unknown flags", r.pos() - 4);
  mesh.periodic = (flags & 1) != 0;
  mesh.sfc_level = r.get<std::int32_t>("sfc level");
  if (mesh.sfc_level < 1 || mesh.sfc_level > sfc::kMaxLevel) throw ParseError("sfc level out of range", r.pos() - 4);
  mesh.box.lo = r.get_vec("box");
  mesh.box.hi = r.get_vec("box");
  const auto n_nodes = r.get<std::uint64_t>("node count");
  std::array<std::uint64_t, 4> counts{};
  for (auto& c : counts) c = r.get<std::uint64_t>("element count");
  const auto n_sides = r.get<std::uint64_t>("side count");

  // Bound every count by the remaining payload before allocating.
  const std::uint64_t cap = bytes.size();
  if (n_nodes > cap || n_sides > cap || counts[0] > cap || counts[1] > cap || counts[2] > cap || counts[3] > cap) {
    throw ParseError("truncated file: header announces more data than present", bytes.size());
  }
  std::uint64_t need = n_nodes * 24 + n_sides * 44;
  std::uint64_t n_elem = 0;
  for (auto t : kAllElementTypes) {
    const auto c = counts[static_cast<int>(t)];
    need += c * (8 + 4 * node_count(t) + 24 + 8 + 8);
    n_elem += c;
  }
  if (r.pos() > body || need > body - r.pos()) {
    throw ParseError("truncated file: header announces more data than present", bytes.size());
  }
  if (need != body - r.pos()) throw ParseError("trailing bytes after mesh payload", r.pos() + need);

  mesh.nodes.resize(n_nodes);
  for (auto& x : mesh.nodes) x = r.get_vec("node");
  mesh.elements.resize(n_elem);
  std::vector<bool> seen(n_elem, false);
  for (auto t : kAllElementTypes) {
    for (std::uint64_t i = 0; i < counts[static_cast<int>(t)]; ++i) {
      const auto at = r.pos();
      const auto pos = r.get<std::uint64_t>("element position");
      if (pos >= n_elem || seen[pos]) throw ParseError("invalid element position", at);
      seen[pos] = true;
      Element& el = mesh.elements[pos];
      el.type = t;
      for (int v = 0; v < node_count(t); ++v) {
        el.nodes[v] = r.get<NodeId>("element node");
        if (el.nodes[v] >= n_nodes) throw ParseError("element node id out of range", r.pos() - 4);
      }
      el.barycenter = r.get_vec("barycenter");
      el.jacobian = r.get<double>("jacobian");
      el.sfc_index.value = r.get<std::uint64_t>("sfc index");
    }
  }
  mesh.sides.resize(n_sides);
  mesh.elem_sides.assign(n_elem, {});
  for (auto& row : mesh.elem_sides) row.fill(-1);
  for (std::size_t s = 0; s < n_sides; ++s) {
    const auto at = r.pos();
    Side& side = mesh.sides[s];
    side.n_nodes = r.get<std::uint8_t>("side");
    side.periodic = r.get<std::uint8_t>("side") != 0;
    side.master_face = r.get<std::int8_t>("side");
    side.slave_face = r.get<std::int8_t>("side");
    side.master_elem = r.get<std::int32_t>("side");
    side.slave_elem = r.get<std::int32_t>("side");
    for (auto& id : side.node_ids) id = r.get<NodeId>("side");
    for (auto& id : side.slave_node_ids) id = r.get<NodeId>("side");
    const auto n = static_cast<std::int32_t>(n_elem);
    const bool ok = (side.n_nodes == 3 || side.n_nodes == 4) && side.master_elem >= 0 && side.master_elem < n &&
                    side.slave_elem >= kNoElement && side.slave_elem < n && side.master_face >= 0 &&
                    side.master_face < kMaxElementFaces && side.slave_face < kMaxElementFaces &&
                    (side.slave_elem == kNoElement || side.slave_face >= 0);
    if (!ok) throw ParseError("invalid side record", at);
    mesh.elem_sides[side.master_elem][side.master_face] = static_cast<std::int32_t>(s);
    if (!side.is_boundary()) mesh.elem_sides[side.slave_elem][side.slave_face] = static_cast<std::int32_t>(s);
  }
  const auto at = r.pos();
  const auto stored = r.get<std::uint64_t>("checksum");
  if (stored != fnv1a64(bytes.first(at))) throw ParseError("checksum mismatch", at);
  return mesh;
}

void write_mesh(const Mesh& mesh, const std::filesystem::path& path) {
  const auto bytes = serialize_mesh(mesh);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Mesh read_mesh(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_mesh(bytes);
}

void write_mesh_sidecar(const Mesh& mesh, const std::filesystem::path& path) {
  const auto counts = mesh.count_by_type();
  nlohmann::json j;
  j["format_version"] = kMeshFormatVersion;
  j["periodic"] = mesh.periodic;
  j["sfc_level"] = mesh.sfc_level;
  j["box"] = {{"lo", {mesh.box.lo.x(), mesh.box.lo.y(), mesh.box.lo.z()}},
              {"hi", {mesh.box.hi.x(), mesh.box.hi.y(), mesh.box.hi.z()}}};
  j["n_nodes"] = mesh.nodes.size();
  j["n_sides"] = mesh.sides.size();
  j["n_elements"] = mesh.elements.size();
  for (auto t : kAllElementTypes) j["elements_by_type"][std::string(to_string(t))] = counts[static_cast<int>(t)];
  const auto bytes = serialize_mesh(mesh);
  j["checksum_fnv1a"] = fnv1a64(bytes);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

bool meshes_identical(const Mesh& a, const Mesh& b) { return serialize_mesh(a) == serialize_mesh(b); }

}  // namespace sfcb
