#pragma once

#include <vector>

#include "sfcb/element_type.hpp"
#include "sfcb/geometry.hpp"

namespace sfcb::quad {

struct Rule1D {
  std::vector<double> x;
  std::vector<double> w;
};

/// n-point Gauss-Legendre rule on [-1, 1].
Rule1D gauss_legendre(int n);
/// Same rule mapped to [0, 1]; weights sum to 1.
Rule1D gauss_legendre_unit(int n);

/// Legendre polynomial P_n and its derivative at x.
struct LegendreValue {
  double p;
  double dp;
};
LegendreValue legendre(int n, double x);

/// Barycentric Lagrange interpolation on a fixed 1D node set.
class Lagrange1D {
 public:
  explicit Lagrange1D(std::vector<double> nodes);
  std::size_t size() const { return x_.size(); }
  /// l_i(t) for every i.
  std::vector<double> values(double t) const;
  /// D(p, i) = l_i'(x_p).
  std::vector<std::vector<double>> derivative_matrix() const;

 private:
  std::vector<double> x_;
  std::vector<double> lambda_;
};

struct PointSet {
  std::vector<Vec3> x;
  std::vector<double> w;
};

/// Map of the unit cube onto the reference element (identity for hexes after
/// scaling to [-1,1]^3) and its jacobian.
Vec3 collapse(ElementType type, double a, double b, double c);
double collapse_jacobian(ElementType type, double a, double b, double c);

/// Product Gauss rule with m points per direction pushed through the
/// collapse; exact for polynomials of degree 2m-1-(jacobian degree) in each
/// collapsed direction. Weights sum to the reference volume.
PointSet volume_rule(ElementType type, int m);

/// Radical-inverse (van der Corput) value of index i in the given base.
double radical_inverse(unsigned long i, unsigned base);

/// Face rule with vertex-weight coordinates: a face point is
/// sum_i lambda[p][i] * vertex_i. Weights sum to 1.
struct FaceRule {
  int n_vertices = 0;
  std::vector<std::array<double, 4>> lambda;
  std::vector<double> w;
};

/// Triangles: collapsed Gauss, m x m points. Quads: tensor Gauss m x m on
/// the bilinear parameterisation.
FaceRule face_rule(int n_vertices, int m);

}  // namespace sfcb::quad
