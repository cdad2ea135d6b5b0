#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "sfcb/basis.hpp"
#include "sfcb/lserk.hpp"
#include "sfcb/mesh.hpp"
#include "sfcb/timing.hpp"

// Discontinuous Galerkin discretisation of u_t + a . grad u = 0 (n_var
// independent copies). Hexes use the collocated Gauss tensor basis with
// dimension-by-dimension operators; tets, prisms and pyramids are advanced
// in modal space: project, evolve the modal coefficients, reconstruct.

namespace sfcb {

struct KernelConfig {
  int degree = 5;
  int n_var = 1;
  Vec3 velocity = Vec3(1.0, 1.0, 1.0);
  BasisOptions basis;
};

struct ElementGeometry {
  double jacobian = 1.0;
  Vec3 contravariant = Vec3::Zero();  ///< A^{-1} a
  AffineMap map;
};

struct SideGeometry {
  double area = 0.0;
  Vec3 normal = Vec3::Zero();  ///< unit, pointing out of the master
  double normal_velocity = 0.0;  ///< a . n
  int slave_code = 0;          ///< orientation of the slave face relative to the master
};

/// Element state: nodal values (n_nodes x n_var) and, for modal types, the
/// modal coefficients (n_modes x n_var).
struct ElementState {
  Eigen::MatrixXd q_nodal;
  Eigen::MatrixXd q_modal;
  std::int64_t owner = -1;  ///< global element index
};

/// q_modal = M^{-1} V^T W J q_nodal with M = V^T W J V. Each refinement step
/// re-applies the projection to the nodal residual q - V q_modal, which keeps
/// repeated project/reconstruct cycles from drifting.
Eigen::MatrixXd modal_project(const Eigen::MatrixXd& q_nodal, const BasisSet& basis, double jacobian,
                              int refinement_steps = 1);
/// q_nodal = V q_modal.
Eigen::MatrixXd modal_reconstruct(const Eigen::MatrixXd& q_modal, const BasisSet& basis);

/// Immutable mesh + reference data shared read-only by all ranks.
class Discretization {
 public:
  Discretization(std::shared_ptr<const Mesh> mesh, const KernelConfig& config);

  const Mesh& mesh() const { return *mesh_; }
  const KernelConfig& config() const { return config_; }
  int n_var() const { return config_.n_var; }
  int degree() const { return config_.degree; }
  const BasisSet& basis(ElementType t) const { return bases_[static_cast<int>(t)]; }
  const BasisSet& basis_of(std::size_t elem) const { return basis(mesh_->elements[elem].type); }
  const ElementGeometry& element(std::size_t e) const { return elems_[e]; }
  const SideGeometry& side(std::size_t s) const { return sides_[s]; }
  std::size_t n_elements() const { return elems_.size(); }
  std::size_t n_sides() const { return sides_.size(); }

  /// Values per element in the exchange payload: n_var * (N+1)^3.
  std::size_t slot_size() const;
  std::int64_t n_dof() const;
  std::vector<Vec3> physical_nodes(std::size_t e) const;
  /// 3 * volume / surface area of each element.
  double element_length(std::size_t e) const;
  /// Conservative explicit time step for the given Courant number.
  double cfl_time_step(double courant) const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  KernelConfig config_;
  std::array<BasisSet, 4> bases_;
  std::vector<ElementGeometry> elems_;
  std::vector<SideGeometry> sides_;
};

/// Volume residual r = int (a u) . grad l_k of one element (overwrites r).
void volume_kernel(const Discretization& disc, std::size_t elem, const Eigen::MatrixXd& q, Eigen::MatrixXd& r);
/// Face values of element `elem` at the side points of local face `face` seen with orientation `code`.
void prolong_to_face(const Discretization& disc, std::size_t elem, int face, int code, const Eigen::MatrixXd& q,
                     Eigen::MatrixXd& trace);
/// Upwind flux (a.n) u_upwind at the side points (n out of the master).
void side_flux(const Discretization& disc, std::size_t side, const Eigen::MatrixXd& u_master,
               const Eigen::MatrixXd& u_slave, Eigen::MatrixXd& flux);
/// r += sign * int f l_k over the face; sign = -1 for the master, +1 for the slave.
void lift_face(const Discretization& disc, std::size_t elem, int face, int code, double sign,
               const Eigen::MatrixXd& flux, Eigen::MatrixXd& r);

/// Point-to-point channel used for the halo exchange.
class HaloTransport {
 public:
  virtual ~HaloTransport() = default;
  virtual void send(int dest, int tag, std::vector<std::uint8_t> bytes) = 0;
  virtual std::vector<std::uint8_t> recv(int src, int tag) = 0;
};

/// Rank-local solver over the contiguous SFC segment [offsets[rank], offsets[rank+1]).
class LocalSolver {
 public:
  LocalSolver(const Discretization& disc, std::vector<std::int64_t> offsets, int rank,
              HaloTransport* halo = nullptr);

  std::int64_t first() const { return first_; }
  std::int64_t last() const { return last_; }
  std::size_t n_local() const { return states_.size(); }
  const std::vector<std::int64_t>& offsets() const { return offsets_; }

  std::vector<ElementState>& states() { return states_; }
  const std::vector<ElementState>& states() const { return states_; }

  void set_initial(const std::function<double(const Vec3&, int)>& u0);
  /// Replaces the nodal states of the local segment (in SFC order).
  void load_nodal(std::vector<Eigen::MatrixXd> q);

  /// One LSERK step. Timers are read only when `measure` is set.
  /// Throws DivergenceError carrying `step` on non-finite values.
  TimerSet advance_timestep(const LserkScheme& scheme, double dt, bool measure, long step,
                            ClockKind clock = ClockKind::ThreadCpu);

  /// Owning local element of every local side (master if local, else slave).
  const std::vector<std::size_t>& side_to_elem() const { return side_to_elem_; }
  std::vector<bool> modal_flags() const;
  std::size_t n_local_sides() const { return sides_.size(); }
  /// sum over local elements of J w^T q for every variable.
  Eigen::VectorXd integral() const;

 private:
  struct LocalSide {
    std::size_t global;
    bool master_local;
    bool slave_local;
    int remote_rank;
  };
  struct HaloPeer {
    int rank;
    std::vector<std::size_t> sides;  ///< local side indices, ascending global id
  };

  int owner_of(std::int64_t elem) const;
  void prolong_all();
  void post_halo(int tag);
  void complete_halo(int tag);
  void check_finite(long step) const;

  const Discretization& disc_;
  std::vector<std::int64_t> offsets_;
  int rank_;
  HaloTransport* halo_;
  std::int64_t first_, last_;
  std::vector<ElementState> states_;
  std::vector<LocalSide> sides_;
  std::vector<std::size_t> side_to_elem_;
  std::vector<std::array<std::int32_t, kMaxElementFaces>> face_side_;  ///< local side per element face
  std::vector<HaloPeer> peers_;
  std::vector<Eigen::MatrixXd> trace_m_, trace_s_, flux_;
  std::vector<Eigen::MatrixXd> residual_, du_;
  std::vector<Eigen::RowVectorXd> shift_;
  Eigen::MatrixXd shifted_;
  std::vector<std::size_t> hex_elems_, modal_elems_;
  long stage_counter_ = 0;
};

}  // namespace sfcb
