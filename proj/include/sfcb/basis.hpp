#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <array>
#include <vector>

#include "sfcb/element_type.hpp"
#include "sfcb/geometry.hpp"
#include "sfcb/quadrature.hpp"

namespace sfcb {

inline constexpr int kMaxDegree = 10;

struct BasisOptions {
  /// Hexes default to a nodal Lagrange basis (V = I); set to use the
  /// orthonormal Legendre modes instead.
  bool hex_modal = false;
};

/// Permutation of face vertices for a given orientation code: rotations
/// 0..n-1, reflections n..2n-1.
std::array<int, 4> dihedral_permutation(int n_vertices, int code);
/// Inverse of dihedral_permutation; throws MeshError if `perm` is not dihedral.
int orientation_code(int n_vertices, const std::array<int, 4>& perm);

/// Per-element-type reference data: interpolation nodes, Vandermonde,
/// quadrature weights and the nodal operators built from them.
struct BasisSet {
  ElementType element_type = ElementType::Hex;
  int degree = 0;
  int n_nodes = 0;
  int n_modes = 0;

  std::vector<Vec3> nodes;         ///< reference coordinates
  Eigen::MatrixXd V;               ///< n_nodes x n_modes
  Eigen::VectorXd w;               ///< diagonal of W; sums to the reference volume
  Eigen::MatrixXd reference_mass;  ///< V^T W V
  Eigen::LLT<Eigen::MatrixXd> mass_llt;
  /// sqrt(W) V = Q R; R^T R is the reference mass, factored without squaring
  /// the condition number of V.
  Eigen::MatrixXd mass_q;
  Eigen::MatrixXd mass_r;
  Eigen::VectorXd sqrt_w;

  // Orthonormal modal functions phi = psi * coeff, psi = Legendre products on bbox.
  std::vector<std::array<int, 3>> exponents;
  Eigen::MatrixXd coeff;
  Box bbox;

  // Nodal operators (independent of the V option).
  Eigen::MatrixXd nodal_to_modal;  ///< Phi(nodes)^{-1}
  Eigen::MatrixXd inv_mass;        ///< nodal inverse mass for J = 1
  std::array<Eigen::MatrixXd, 3> stiffness;  ///< K_d(k, m) = int l_m d_d l_k
  quad::FaceRule tri_rule;
  quad::FaceRule quad_rule;
  /// trace[f][code]: nodal values -> face points of side orientation `code`.
  std::vector<std::vector<Eigen::MatrixXd>> trace;

  // Tensor data for hexes.
  std::vector<double> x1d, w1d;
  Eigen::MatrixXd weak_diff;  ///< D(i, p) = w_p l_i'(x_p)
  std::vector<double> l_lo, l_hi;  ///< l_i(-1), l_i(+1)
  /// hex_face_index[f][code][p]: tangential tensor index (t1 + (N+1) t2) of side point p.
  std::vector<std::vector<std::vector<int>>> hex_face_index;

  const quad::FaceRule& face_rule(int face) const;
  /// Orthonormal modes evaluated at reference points (rows = points).
  Eigen::MatrixXd eval_modes(const std::vector<Vec3>& pts) const;
  /// Gradient of the modes along reference axis d.
  Eigen::MatrixXd eval_mode_derivative(const std::vector<Vec3>& pts, int d) const;
  /// Condition number of V (2-norm).
  double vandermonde_condition() const;
};

/// Throws ConfigError for N outside [0, 10].
BasisSet build_basis(ElementType type, int degree, const BasisOptions& options = {});

/// Face points of local face `f` of `type` for orientation `code`, in reference coordinates.
std::vector<Vec3> face_points(ElementType type, int face, int code, const quad::FaceRule& rule);

}  // namespace sfcb
