#include "sfcb/kernel.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "sfcb/errors.hpp"

namespace sfcb {
namespace {

double face_area(const Mesh& mesh, const Element& el, int f) {
  const auto& def = reference_faces(el.type)[f];
  const Vec3& v0 = mesh.nodes[el.nodes[def.v[0]]];
  const Vec3 e1 = mesh.nodes[el.nodes[def.v[1]]] - v0;
  const Vec3 e2 = mesh.nodes[el.nodes[def.v[def.n_vertices - 1]]] - v0;
  const double cross = e1.cross(e2).norm();
  return def.n_vertices == 3 ? 0.5 * cross : cross;
}

struct HexStrides {
  int n1;
  int stride[3];
  int d, d1, d2;
  HexStrides(int degree, int face) : n1(degree + 1) {
    stride[0] = 1;
    stride[1] = n1;
    stride[2] = n1 * n1;
    d = face / 2;
    d1 = d == 0 ? 1 : 0;
    d2 = d == 2 ? 1 : 2;
  }
  int index(int q, int t) const { return q * stride[d] + (t % n1) * stride[d1] + (t / n1) * stride[d2]; }
};

}  // namespace

Eigen::MatrixXd modal_project(const Eigen::MatrixXd& q_nodal, const BasisSet& basis, double jacobian,
                              int refinement_steps) {
  // M = V^T W J V = (sqrt(J) R)^T (sqrt(J) R) with sqrt(W) V = Q R, so
  // M^{-1} V^T W J q = (sqrt(J) R)^{-1} Q^T sqrt(W J) q.
  const double sj = std::sqrt(jacobian);
  auto apply = [&](const Eigen::MatrixXd& q) {
    Eigen::MatrixXd rhs = basis.mass_q.transpose() * (basis.sqrt_w.asDiagonal() * q) * sj;
    basis.mass_r.triangularView<Eigen::Upper>().solveInPlace(rhs);
    return Eigen::MatrixXd(rhs / sj);
  };
  Eigen::MatrixXd qm = apply(q_nodal);
  for (int it = 0; it < refinement_steps; ++it) qm += apply(q_nodal - basis.V * qm);
  return qm;
}

Eigen::MatrixXd modal_reconstruct(const Eigen::MatrixXd& q_modal, const BasisSet& basis) { return basis.V * q_modal; }

Discretization::Discretization(std::shared_ptr<const Mesh> mesh, const KernelConfig& config)
    : mesh_(std::move(mesh)), config_(config) {
  if (config_.n_var < 1) throw ConfigError("n_var must be >= 1");
  const auto counts = mesh_->count_by_type();
  for (auto t : kAllElementTypes) {
    // Types absent from the mesh still get a basis so lookups stay uniform;
    // only their construction cost is wasted.
    if (counts[static_cast<int>(t)] > 0 || t == ElementType::Hex) {
      bases_[static_cast<int>(t)] = build_basis(t, config_.degree, config_.basis);
    }
  }
  elems_.resize(mesh_->elements.size());
  for (std::size_t e = 0; e < elems_.size(); ++e) {
    auto& g = elems_[e];
    g.map = element_affine_map(*mesh_, mesh_->elements[e]);
    g.jacobian = g.map.det;
    g.contravariant = g.map.a.inverse() * config_.velocity;
  }
  sides_.resize(mesh_->sides.size());
  for (std::size_t s = 0; s < sides_.size(); ++s) {
    const Side& side = mesh_->sides[s];
    const Element& m = mesh_->elements[side.master_elem];
    auto& g = sides_[s];
    const Vec3& v0 = mesh_->nodes[side.node_ids[0]];
    const Vec3 e1 = mesh_->nodes[side.node_ids[1]] - v0;
    const Vec3 e2 = mesh_->nodes[side.node_ids[side.n_nodes - 1]] - v0;
    Vec3 n = e1.cross(e2);
    g.area = side.n_nodes == 3 ? 0.5 * n.norm() : n.norm();
    n.normalize();
    Vec3 centroid = Vec3::Zero();
    for (int i = 0; i < side.n_nodes; ++i) centroid += mesh_->nodes[side.node_ids[i]] / side.n_nodes;
    if (n.dot(centroid - m.barycenter) < 0) n = -n;
    g.normal = n;
    g.normal_velocity = config_.velocity.dot(n);
    if (!side.is_boundary()) {
      const Element& sl = mesh_->elements[side.slave_elem];
      const auto& def = reference_faces(sl.type)[side.slave_face];
      std::array<int, 4> perm{};
      for (int i = 0; i < side.n_nodes; ++i) {
        perm[i] = -1;
        for (int j = 0; j < def.n_vertices; ++j)
          if (sl.nodes[def.v[j]] == side.slave_node_ids[i]) perm[i] = j;
        if (perm[i] < 0) throw MeshError("slave face does not contain the side nodes");
      }
      g.slave_code = orientation_code(side.n_nodes, perm);
    }
  }
}

std::size_t Discretization::slot_size() const {
  const std::size_t n1 = static_cast<std::size_t>(config_.degree) + 1;
  return static_cast<std::size_t>(config_.n_var) * n1 * n1 * n1;
}

std::int64_t Discretization::n_dof() const {
  std::int64_t n = 0;
  for (const auto& el : mesh_->elements) n += basis(el.type).n_nodes;
  return n * config_.n_var;
}

std::vector<Vec3> Discretization::physical_nodes(std::size_t e) const {
  const auto& b = basis_of(e);
  std::vector<Vec3> x;
  x.reserve(b.nodes.size());
  for (const auto& xi : b.nodes) x.push_back(elems_[e].map.to_physical(xi));
  return x;
}

double Discretization::element_length(std::size_t e) const {
  const Element& el = mesh_->elements[e];
  double surface = 0.0;
  for (int f = 0; f < static_cast<int>(reference_faces(el.type).size()); ++f) surface += face_area(*mesh_, el, f);
  return 3.0 * elems_[e].jacobian * reference_volume(el.type) / surface;
}

double Discretization::cfl_time_step(double courant) const {
  double h = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < elems_.size(); ++e) h = std::min(h, element_length(e));
  const double speed = config_.velocity.norm();
  if (!(speed > 0.0)) return courant * h;
  return courant * h / (speed * (2 * config_.degree + 1));
}

void volume_kernel(const Discretization& disc, std::size_t elem, const Eigen::MatrixXd& q, Eigen::MatrixXd& r) {
  const auto& b = disc.basis_of(elem);
  const auto& g = disc.element(elem);
  r.resize(q.rows(), q.cols());
  if (b.element_type != ElementType::Hex) {
    const Vec3 c = g.contravariant * g.jacobian;
    r.noalias() = c[0] * (b.stiffness[0] * q);
    r.noalias() += c[1] * (b.stiffness[1] * q);
    r.noalias() += c[2] * (b.stiffness[2] * q);
    return;
  }
  // Dimension-by-dimension weak derivative, O((N+1)^4).
  const int n1 = b.degree + 1;
  const double* dw = b.weak_diff.data();  // column-major: D(i, p) = dw[i + n1 p]
  const double* w = b.w1d.data();
  r.setZero();
  for (Eigen::Index v = 0; v < q.cols(); ++v) {
    const double* u = q.col(v).data();
    double* out = r.col(v).data();
    const double c0 = g.jacobian * g.contravariant[0];
    const double c1 = g.jacobian * g.contravariant[1];
    const double c2 = g.jacobian * g.contravariant[2];
    for (int k = 0; k < n1; ++k)
      for (int j = 0; j < n1; ++j) {
        const double* line = u + n1 * (j + n1 * k);
        const double s = c0 * w[j] * w[k];
        for (int i = 0; i < n1; ++i) {
          double acc = 0.0;
          for (int p = 0; p < n1; ++p) acc += dw[i + n1 * p] * line[p];
          out[i + n1 * (j + n1 * k)] += s * acc;
        }
      }
    for (int k = 0; k < n1; ++k)
      for (int i = 0; i < n1; ++i) {
        const double s = c1 * w[i] * w[k];
        for (int j = 0; j < n1; ++j) {
          double acc = 0.0;
          for (int p = 0; p < n1; ++p) acc += dw[j + n1 * p] * u[i + n1 * (p + n1 * k)];
          out[i + n1 * (j + n1 * k)] += s * acc;
        }
      }
    for (int j = 0; j < n1; ++j)
      for (int i = 0; i < n1; ++i) {
        const double s = c2 * w[i] * w[j];
        for (int k = 0; k < n1; ++k) {
          double acc = 0.0;
          for (int p = 0; p < n1; ++p) acc += dw[k + n1 * p] * u[i + n1 * (j + n1 * p)];
          out[i + n1 * (j + n1 * k)] += s * acc;
        }
      }
  }
}

void prolong_to_face(const Discretization& disc, std::size_t elem, int face, int code, const Eigen::MatrixXd& q,
                     Eigen::MatrixXd& trace) {
  const auto& b = disc.basis_of(elem);
  if (b.element_type != ElementType::Hex) {
    trace.noalias() = b.trace[face][code] * q;
    return;
  }
  const HexStrides hs(b.degree, face);
  const auto& l = (face % 2) ? b.l_hi : b.l_lo;
  const auto& idx = b.hex_face_index[face][code];
  const int n_face = hs.n1 * hs.n1;
  trace.resize(n_face, q.cols());
  for (Eigen::Index v = 0; v < q.cols(); ++v) {
    const double* u = q.col(v).data();
    for (int p = 0; p < n_face; ++p) {
      const int t = idx[p];
      double acc = 0.0;
      for (int m = 0; m < hs.n1; ++m) acc += l[m] * u[hs.index(m, t)];
      trace(p, v) = acc;
    }
  }
}

void side_flux(const Discretization& disc, std::size_t side, const Eigen::MatrixXd& u_master,
               const Eigen::MatrixXd& u_slave, Eigen::MatrixXd& flux) {
  const double an = disc.side(side).normal_velocity;
  flux.noalias() = an * (an >= 0.0 ? u_master : u_slave);
}

void lift_face(const Discretization& disc, std::size_t elem, int face, int code, double sign,
               const Eigen::MatrixXd& flux, Eigen::MatrixXd& r) {
  const auto& b = disc.basis_of(elem);
  const auto& mesh = disc.mesh();
  const double area = disc.side(static_cast<std::size_t>(mesh.elem_sides[elem][face])).area;
  const auto& rule = b.face_rule(face);
  const Eigen::Map<const Eigen::VectorXd> w(rule.w.data(), static_cast<Eigen::Index>(rule.w.size()));
  if (b.element_type != ElementType::Hex) {
    r.noalias() += (sign * area) * (b.trace[face][code].transpose() * (w.asDiagonal() * flux));
    return;
  }
  const HexStrides hs(b.degree, face);
  const auto& l = (face % 2) ? b.l_hi : b.l_lo;
  const auto& idx = b.hex_face_index[face][code];
  const int n_face = hs.n1 * hs.n1;
  for (Eigen::Index v = 0; v < flux.cols(); ++v) {
    double* out = r.col(v).data();
    for (int p = 0; p < n_face; ++p) {
      const double g = sign * area * w[p] * flux(p, v);
      const int t = idx[p];
      for (int m = 0; m < hs.n1; ++m) out[hs.index(m, t)] += l[m] * g;
    }
  }
}

LocalSolver::LocalSolver(const Discretization& disc, std::vector<std::int64_t> offsets, int rank,
                         HaloTransport* halo)
    : disc_(disc), offsets_(std::move(offsets)), rank_(rank), halo_(halo) {
  const auto n_ranks = static_cast<int>(offsets_.size()) - 1;
  if (rank < 0 || rank >= n_ranks) throw std::invalid_argument("rank outside the partition");
  if (offsets_.front() != 0 || offsets_.back() != static_cast<std::int64_t>(disc.n_elements())) {
    throw std::invalid_argument("partition does not cover the mesh");
  }
  first_ = offsets_[rank];
  last_ = offsets_[rank + 1];
  const Mesh& mesh = disc.mesh();
  const int n_var = disc.n_var();

  states_.resize(static_cast<std::size_t>(last_ - first_));
  residual_.resize(states_.size());
  du_.resize(states_.size());
  shift_.resize(states_.size());
  for (std::size_t l = 0; l < states_.size(); ++l) {
    const auto e = static_cast<std::size_t>(first_) + l;
    const auto& b = disc.basis_of(e);
    states_[l].owner = static_cast<std::int64_t>(e);
    states_[l].q_nodal = Eigen::MatrixXd::Zero(b.n_nodes, n_var);
    residual_[l] = Eigen::MatrixXd::Zero(b.n_nodes, n_var);
    if (is_modal(b.element_type)) {
      states_[l].q_modal = Eigen::MatrixXd::Zero(b.n_modes, n_var);
      du_[l] = Eigen::MatrixXd::Zero(b.n_modes, n_var);
      modal_elems_.push_back(l);
    } else {
      du_[l] = Eigen::MatrixXd::Zero(b.n_nodes, n_var);
      hex_elems_.push_back(l);
    }
  }

  std::vector<std::size_t> globals;
  for (std::int64_t e = first_; e < last_; ++e) {
    const Element& el = mesh.elements[e];
    for (int f = 0; f < static_cast<int>(reference_faces(el.type).size()); ++f) {
      globals.push_back(static_cast<std::size_t>(mesh.elem_sides[e][f]));
    }
  }
  std::sort(globals.begin(), globals.end());
  globals.erase(std::unique(globals.begin(), globals.end()), globals.end());
  std::vector<std::int32_t> local_of(mesh.sides.size(), -1);
  for (std::size_t i = 0; i < globals.size(); ++i) {
    const Side& s = mesh.sides[globals[i]];
    LocalSide ls{globals[i], s.master_elem >= first_ && s.master_elem < last_,
                 !s.is_boundary() && s.slave_elem >= first_ && s.slave_elem < last_, -1};
    if (!s.is_boundary() && !(ls.master_local && ls.slave_local)) {
      ls.remote_rank = owner_of(ls.master_local ? s.slave_elem : s.master_elem);
    }
    local_of[globals[i]] = static_cast<std::int32_t>(i);
    sides_.push_back(ls);
    side_to_elem_.push_back(static_cast<std::size_t>((ls.master_local ? s.master_elem : s.slave_elem) - first_));
    const int n_pts = (s.n_nodes == 3 ? disc.basis_of(s.master_elem).tri_rule : disc.basis_of(s.master_elem).quad_rule)
                          .w.size();
    trace_m_.push_back(Eigen::MatrixXd::Zero(n_pts, n_var));
    trace_s_.push_back(Eigen::MatrixXd::Zero(n_pts, n_var));
    flux_.push_back(Eigen::MatrixXd::Zero(n_pts, n_var));
  }
  face_side_.resize(states_.size());
  for (std::size_t l = 0; l < states_.size(); ++l) {
    face_side_[l].fill(-1);
    const auto e = static_cast<std::size_t>(first_) + l;
    for (int f = 0; f < static_cast<int>(reference_faces(mesh.elements[e].type).size()); ++f) {
      face_side_[l][f] = local_of[mesh.elem_sides[e][f]];
    }
  }
  for (std::size_t i = 0; i < sides_.size(); ++i) {
    if (sides_[i].remote_rank < 0) continue;
    auto it = std::find_if(peers_.begin(), peers_.end(), [&](const HaloPeer& p) { return p.rank == sides_[i].remote_rank; });
    if (it == peers_.end()) {
      peers_.push_back({sides_[i].remote_rank, {}});
      it = peers_.end() - 1;
    }
    it->sides.push_back(i);
  }
  std::sort(peers_.begin(), peers_.end(), [](const HaloPeer& a, const HaloPeer& b) { return a.rank < b.rank; });
  if (!peers_.empty() && !halo_) throw TopologyError("partition has remote neighbours but no halo transport");
}

int LocalSolver::owner_of(std::int64_t elem) const {
  const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), elem);
  return static_cast<int>(it - offsets_.begin()) - 1;
}

void LocalSolver::set_initial(const std::function<double(const Vec3&, int)>& u0) {
  for (auto& st : states_) {
    const auto x = disc_.physical_nodes(static_cast<std::size_t>(st.owner));
    for (Eigen::Index v = 0; v < st.q_nodal.cols(); ++v)
      for (std::size_t p = 0; p < x.size(); ++p) st.q_nodal(static_cast<Eigen::Index>(p), v) = u0(x[p], static_cast<int>(v));
  }
}

void LocalSolver::load_nodal(std::vector<Eigen::MatrixXd> q) {
  if (q.size() != states_.size()) throw std::invalid_argument("state count does not match the local segment");
  for (std::size_t l = 0; l < q.size(); ++l) {
    if (q[l].rows() != states_[l].q_nodal.rows() || q[l].cols() != states_[l].q_nodal.cols()) {
      throw std::invalid_argument("state shape does not match the element basis");
    }
    states_[l].q_nodal = std::move(q[l]);
  }
}

std::vector<bool> LocalSolver::modal_flags() const {
  std::vector<bool> flags(states_.size());
  for (std::size_t l = 0; l < states_.size(); ++l)
    flags[l] = is_modal(disc_.mesh().elements[static_cast<std::size_t>(states_[l].owner)].type);
  return flags;
}

Eigen::VectorXd LocalSolver::integral() const {
  Eigen::VectorXd total = Eigen::VectorXd::Zero(disc_.n_var());
  for (const auto& st : states_) {
    const auto e = static_cast<std::size_t>(st.owner);
    total += disc_.element(e).jacobian * (st.q_nodal.transpose() * disc_.basis_of(e).w);
  }
  return total;
}

void LocalSolver::prolong_all() {
  const Mesh& mesh = disc_.mesh();
  for (std::size_t i = 0; i < sides_.size(); ++i) {
    const auto& ls = sides_[i];
    const Side& s = mesh.sides[ls.global];
    if (ls.master_local) {
      prolong_to_face(disc_, static_cast<std::size_t>(s.master_elem), s.master_face, 0,
                      states_[static_cast<std::size_t>(s.master_elem - first_)].q_nodal, trace_m_[i]);
    }
    if (ls.slave_local) {
      prolong_to_face(disc_, static_cast<std::size_t>(s.slave_elem), s.slave_face, disc_.side(ls.global).slave_code,
                      states_[static_cast<std::size_t>(s.slave_elem - first_)].q_nodal, trace_s_[i]);
    }
  }
}

void LocalSolver::post_halo(int tag) {
  for (const auto& peer : peers_) {
    std::size_t n = 0;
    for (auto i : peer.sides) n += static_cast<std::size_t>(trace_m_[i].size());
    std::vector<std::uint8_t> bytes(n * sizeof(double));
    std::size_t off = 0;
    for (auto i : peer.sides) {
      const auto& src = sides_[i].master_local ? trace_m_[i] : trace_s_[i];
      const std::size_t len = static_cast<std::size_t>(src.size()) * sizeof(double);
      std::memcpy(bytes.data() + off, src.data(), len);
      off += len;
    }
    halo_->send(peer.rank, tag, std::move(bytes));
  }
}

void LocalSolver::complete_halo(int tag) {
  for (const auto& peer : peers_) {
    const auto bytes = halo_->recv(peer.rank, tag);
    std::size_t off = 0;
    for (auto i : peer.sides) {
      auto& dst = sides_[i].master_local ? trace_s_[i] : trace_m_[i];
      const std::size_t len = static_cast<std::size_t>(dst.size()) * sizeof(double);
      if (off + len > bytes.size()) {
        throw TopologyError("halo message from rank " + std::to_string(peer.rank) + " is shorter than expected");
      }
      std::memcpy(dst.data(), bytes.data() + off, len);
      off += len;
    }
    if (off != bytes.size()) {
      throw TopologyError("halo message from rank " + std::to_string(peer.rank) + " has unmatched side data");
    }
  }
}

void LocalSolver::check_finite(long step) const {
  for (const auto& st : states_) {
    if (!st.q_nodal.allFinite()) {
      throw DivergenceError("non-finite solution in element " + std::to_string(st.owner), step);
    }
  }
}

TimerSet LocalSolver::advance_timestep(const LserkScheme& scheme, double dt, bool measure, long step, ClockKind clock) {
  TimerSet timers;
  timers.active = measure && !states_.empty();
  timers.clock = clock;
  timers.n_elems = states_.size();
  timers.n_sides = sides_.size();
  timers.n_modal_elems = modal_elems_.size();
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  const Mesh& mesh = disc_.mesh();

  if (!modal_elems_.empty()) {
    SectionTimer t(timers, Category::DgModal);
    for (auto l : modal_elems_) {
      const auto e = static_cast<std::size_t>(states_[l].owner);
      states_[l].q_modal = modal_project(states_[l].q_nodal, disc_.basis_of(e), disc_.element(e).jacobian);
    }
  }
  for (auto& d : du_) d.setZero();

  for (int stage = 0; stage < scheme.n_stages(); ++stage) {
    const int tag = static_cast<int>(stage_counter_++ & 0x3fffffff);
    const double a = scheme.a[stage], b = scheme.b[stage];
    {
      SectionTimer t(timers, Category::DgElems);
      prolong_all();
    }
    post_halo(tag);
    {
      SectionTimer t(timers, Category::DgElems);
      // The residual is evaluated on q - c with c the value at the first
      // node. Constants are annihilated exactly by the weak form, so this
      // changes nothing but roundoff, and a uniform state gives a residual
      // of exactly zero.
      for (std::size_t l = 0; l < states_.size(); ++l) {
        const auto& q = states_[l].q_nodal;
        shift_[l] = q.row(0);
        shifted_.noalias() = q.rowwise() - shift_[l];
        volume_kernel(disc_, static_cast<std::size_t>(states_[l].owner), shifted_, residual_[l]);
      }
    }
    complete_halo(tag);
    {
      SectionTimer t(timers, Category::DgSides);
      for (std::size_t i = 0; i < sides_.size(); ++i) {
        if (mesh.sides[sides_[i].global].is_boundary()) trace_s_[i].setZero();
        side_flux(disc_, sides_[i].global, trace_m_[i], trace_s_[i], flux_[i]);
      }
      for (std::size_t l = 0; l < states_.size(); ++l) {
        const auto e = static_cast<std::size_t>(states_[l].owner);
        const int n_faces = static_cast<int>(reference_faces(mesh.elements[e].type).size());
        for (int f = 0; f < n_faces; ++f) {
          const auto i = static_cast<std::size_t>(face_side_[l][f]);
          const Side& s = mesh.sides[sides_[i].global];
          const bool is_master = static_cast<std::size_t>(s.master_elem) == e && s.master_face == f;
          const SideGeometry& sg = disc_.side(sides_[i].global);
          shifted_.noalias() = flux_[i].rowwise() - sg.normal_velocity * shift_[l];
          lift_face(disc_, e, f, is_master ? 0 : sg.slave_code, is_master ? -1.0 : 1.0, shifted_, residual_[l]);
        }
      }
    }
    {
      SectionTimer t(timers, Category::DgElems);
      for (auto l : hex_elems_) {
        const auto e = static_cast<std::size_t>(states_[l].owner);
        const auto& basis = disc_.basis_of(e);
        const double jac = disc_.element(e).jacobian;
        auto& du = du_[l];
        auto& q = states_[l].q_nodal;
        const auto& r = residual_[l];
        for (Eigen::Index v = 0; v < q.cols(); ++v)
          for (Eigen::Index p = 0; p < q.rows(); ++p) {
            du(p, v) = a * du(p, v) + dt * (r(p, v) / (jac * basis.w[p]));
            q(p, v) += b * du(p, v);
          }
      }
    }
    if (!modal_elems_.empty()) {
      SectionTimer t(timers, Category::DgModal);
      for (auto l : modal_elems_) {
        const auto e = static_cast<std::size_t>(states_[l].owner);
        const auto& basis = disc_.basis_of(e);
        const double jac = disc_.element(e).jacobian;
        // With orthonormal modes the modal mass is J I, so the modal time
        // derivative is V^T r / J. This equals the projection of the nodal
        // derivative M^{-1} r without passing through the ill-conditioned
        // nodal inverse mass.
        du_[l] = a * du_[l] + (dt / jac) * (basis.V.transpose() * residual_[l]);
        states_[l].q_modal += b * du_[l];
        states_[l].q_nodal.noalias() = basis.V * states_[l].q_modal;
      }
    }
  }
  check_finite(step);
  return timers;
}

}  // namespace sfcb
