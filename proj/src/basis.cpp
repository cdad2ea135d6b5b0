#include "sfcb/basis.hpp"

#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <string>

#include "sfcb/errors.hpp"
#include "sfcb/nnls.hpp"

namespace sfcb {
namespace {

std::vector<std::array<int, 3>> exponent_set(ElementType type, int n) {
  std::vector<std::array<int, 3>> e;
  for (int total = 0; total <= 3 * n; ++total)
    for (int k = 0; k <= n; ++k)
      for (int j = 0; j <= n; ++j) {
        const int i = total - j - k;
        if (i < 0 || i > n) continue;
        bool in = false;
        switch (type) {
          case ElementType::Hex: in = true; break;
          case ElementType::Tet: in = total <= n; break;
          case ElementType::Prism: in = i + j <= n; break;
          case ElementType::Pyramid: in = std::max(i, j) + k <= n; break;
        }
        if (in) e.push_back({i, j, k});
      }
  return e;
}

// Gauss points per collapsed direction so that products of two modes
// (times the collapse jacobian) are integrated exactly.
int gram_rule_points(ElementType type, int n) {
  switch (type) {
    case ElementType::Hex: return n + 2;
    case ElementType::Tet:
    case ElementType::Prism: return n + 3;
    case ElementType::Pyramid: return 2 * n + 3;
  }
  return n + 2;
}

// Legendre products on the bounding box and their derivatives.
Eigen::MatrixXd eval_psi(const std::vector<std::array<int, 3>>& ex, const Box& box, const std::vector<Vec3>& pts,
                         int deriv) {
  const int n = static_cast<int>(ex.size());
  int pmax = 0;
  for (const auto& e : ex) pmax = std::max({pmax, e[0], e[1], e[2]});
  Eigen::MatrixXd out(pts.size(), n);
  std::vector<std::array<quad::LegendreValue, 3>> tab(pmax + 1);
  const Vec3 scale = 2.0 * box.extent().cwiseInverse();
  for (std::size_t p = 0; p < pts.size(); ++p) {
    const Vec3 xh = (pts[p] - box.lo).cwiseProduct(scale) - Vec3::Ones();
    for (int deg = 0; deg <= pmax; ++deg)
      for (int d = 0; d < 3; ++d) tab[deg][d] = quad::legendre(deg, xh[d]);
    for (int m = 0; m < n; ++m) {
      double v = 1.0;
      for (int d = 0; d < 3; ++d) {
        const auto& lv = tab[ex[m][d]][d];
        v *= (d == deriv) ? lv.dp * scale[d] : lv.p;
      }
      out(p, m) = v;
    }
  }
  return out;
}

std::vector<Vec3> tensor_nodes(const std::vector<double>& x) {
  std::vector<Vec3> pts;
  const auto n = x.size();
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) pts.emplace_back(x[i], x[j], x[k]);
  return pts;
}

struct NodeSelection {
  std::vector<Vec3> nodes;
  Eigen::VectorXd w;
};

// Caratheodory-Tchakaloff subsampling: a positive cubature with exactly
// n_modes points, taken from a collapsed Gauss grid plus Halton points.
NodeSelection select_nodes(const BasisSet& b, const Eigen::VectorXd& moments) {
  const int n = b.n_modes;
  const double vol = reference_volume(b.element_type);
  for (int attempt = 0; attempt < 4; ++attempt) {
    std::vector<Vec3> cand;
    const int n_halton = std::max(4 * n, 32) << attempt;
    const unsigned long start = 1 + static_cast<unsigned long>(attempt) * 7919;
    for (int i = 0; i < n_halton; ++i) {
      const unsigned long h = start + static_cast<unsigned long>(i);
      cand.push_back(quad::collapse(b.element_type, quad::radical_inverse(h, 2), quad::radical_inverse(h, 3),
                                    quad::radical_inverse(h, 5)));
    }
    const auto grid = quad::volume_rule(b.element_type, b.degree + 2);
    cand.insert(cand.end(), grid.x.begin(), grid.x.end());

    const Eigen::MatrixXd phi = b.eval_modes(cand);
    const NnlsResult sol = nnls(phi.transpose(), moments);
    std::vector<Vec3> support;
    for (int i = 0; i < sol.x.size(); ++i)
      if (sol.x[i] > 0.0) support.push_back(cand[i]);
    if (static_cast<int>(support.size()) != n) continue;

    const Eigen::MatrixXd v = b.eval_modes(support);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(v.transpose());
    Eigen::VectorXd w = lu.solve(moments);
    if (!(w.minCoeff() > 1e-10 * vol)) continue;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(v);
    const auto& sv = svd.singularValues();
    if (!(sv[0] / sv[sv.size() - 1] < 1e6)) continue;
    return {support, w};
  }
  throw ConfigError("no positive interpolation node set found for " + std::string(to_string(b.element_type)) +
                    " N=" + std::to_string(b.degree));
}

int nearest_index(const std::vector<double>& x, double t) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(x.size()); ++i)
    if (std::abs(x[i] - t) < std::abs(x[best] - t)) best = i;
  return best;
}

}  // namespace

std::array<int, 4> dihedral_permutation(int nv, int code) {
  if ((nv != 3 && nv != 4) || code < 0 || code >= 2 * nv) throw std::invalid_argument("bad orientation code");
  std::array<int, 4> p{0, 0, 0, 0};
  const int r = code % nv;
  for (int i = 0; i < nv; ++i) p[i] = code < nv ? (i + r) % nv : ((r - i) % nv + nv) % nv;
  return p;
}

int orientation_code(int nv, const std::array<int, 4>& perm) {
  for (int code = 0; code < 2 * nv; ++code) {
    const auto p = dihedral_permutation(nv, code);
    if (std::equal(p.begin(), p.begin() + nv, perm.begin())) return code;
  }
  throw MeshError("face vertex correspondence is not a rotation or reflection");
}

std::vector<Vec3> face_points(ElementType type, int face, int code, const quad::FaceRule& rule) {
  const auto& def = reference_faces(type)[face];
  const auto ref = reference_vertices(type);
  const auto perm = dihedral_permutation(def.n_vertices, code);
  std::vector<Vec3> pts;
  pts.reserve(rule.w.size());
  for (const auto& lam : rule.lambda) {
    Vec3 x = Vec3::Zero();
    for (int i = 0; i < def.n_vertices; ++i) x += lam[i] * ref[def.v[perm[i]]];
    pts.push_back(x);
  }
  return pts;
}

const quad::FaceRule& BasisSet::face_rule(int face) const {
  return reference_faces(element_type)[face].n_vertices == 3 ? tri_rule : quad_rule;
}

Eigen::MatrixXd BasisSet::eval_modes(const std::vector<Vec3>& pts) const {
  return eval_psi(exponents, bbox, pts, -1) * coeff;
}

Eigen::MatrixXd BasisSet::eval_mode_derivative(const std::vector<Vec3>& pts, int d) const {
  return eval_psi(exponents, bbox, pts, d) * coeff;
}

double BasisSet::vandermonde_condition() const {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(V);
  const auto& sv = svd.singularValues();
  return sv[0] / sv[sv.size() - 1];
}

BasisSet build_basis(ElementType type, int degree, const BasisOptions& options) {
  if (degree < 0 || degree > kMaxDegree) {
    throw ConfigError("polynomial degree " + std::to_string(degree) + " outside supported range [0, 10]");
  }
  BasisSet b;
  b.element_type = type;
  b.degree = degree;
  b.exponents = exponent_set(type, degree);
  b.n_modes = static_cast<int>(b.exponents.size());
  b.n_nodes = b.n_modes;
  b.bbox = reference_bounding_box(type);

  // Orthonormalise the Legendre products on the element: sqrt(W) Psi = Q R.
  const auto gram = quad::volume_rule(type, gram_rule_points(type, degree));
  const Eigen::Map<const Eigen::VectorXd> gw(gram.w.data(), static_cast<Eigen::Index>(gram.w.size()));
  Eigen::MatrixXd a = gw.cwiseSqrt().asDiagonal() * eval_psi(b.exponents, b.bbox, gram.x, -1);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(b.n_modes).triangularView<Eigen::Upper>();
  b.coeff = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(b.n_modes, b.n_modes));
  if (r(0, 0) < 0) b.coeff *= -1.0;  // keep the constant mode positive

  const Eigen::MatrixXd phi_q = b.eval_modes(gram.x);
  const Eigen::VectorXd moments = phi_q.transpose() * gw;

  Eigen::MatrixXd phi_nodes;
  if (type == ElementType::Hex) {
    const auto g = quad::gauss_legendre(degree + 1);
    b.x1d = g.x;
    b.w1d = g.w;
    b.nodes = tensor_nodes(g.x);
    b.w.resize(b.n_nodes);
    int idx = 0;
    for (int k = 0; k <= degree; ++k)
      for (int j = 0; j <= degree; ++j)
        for (int i = 0; i <= degree; ++i) b.w[idx++] = g.w[i] * g.w[j] * g.w[k];
    phi_nodes = b.eval_modes(b.nodes);
    b.V = options.hex_modal ? phi_nodes : Eigen::MatrixXd::Identity(b.n_nodes, b.n_nodes);
  } else {
    const NodeSelection sel = select_nodes(b, moments);
    b.nodes = sel.nodes;
    b.w = sel.w;
    phi_nodes = b.eval_modes(b.nodes);
    b.V = phi_nodes;
  }
  b.reference_mass = b.V.transpose() * b.w.asDiagonal() * b.V;
  b.reference_mass = 0.5 * (b.reference_mass + b.reference_mass.transpose()).eval();
  b.mass_llt.compute(b.reference_mass);
  if (b.mass_llt.info() != Eigen::Success) throw ConfigError("reference mass matrix is not positive definite");
  b.sqrt_w = b.w.cwiseSqrt();
  {
    Eigen::HouseholderQR<Eigen::MatrixXd> mqr(b.sqrt_w.asDiagonal() * b.V);
    b.mass_q = mqr.householderQ() * Eigen::MatrixXd::Identity(b.n_nodes, b.n_modes);
    b.mass_r = mqr.matrixQR().topRows(b.n_modes).triangularView<Eigen::Upper>();
  }

  // Nodal operators through the exact orthonormal modes.
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(phi_nodes);
  b.nodal_to_modal = lu.inverse();
  b.inv_mass = phi_nodes * phi_nodes.transpose();
  for (int d = 0; d < 3; ++d) {
    const Eigen::MatrixXd dphi = b.eval_mode_derivative(gram.x, d);
    const Eigen::MatrixXd s = dphi.transpose() * gw.asDiagonal() * phi_q;  // s(k, m) = int phi_m d phi_k
    b.stiffness[d] = b.nodal_to_modal.transpose() * s * b.nodal_to_modal;
  }

  b.tri_rule = quad::face_rule(3, degree + 1);
  b.quad_rule = quad::face_rule(4, degree + 1);
  const auto faces = reference_faces(type);
  b.trace.resize(faces.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const int nv = faces[f].n_vertices;
    for (int code = 0; code < 2 * nv; ++code) {
      const auto pts = face_points(type, static_cast<int>(f), code, b.face_rule(static_cast<int>(f)));
      b.trace[f].push_back(b.eval_modes(pts) * b.nodal_to_modal);
    }
  }

  if (type == ElementType::Hex) {
    const int n1 = degree + 1;
    const quad::Lagrange1D lag(b.x1d);
    const auto dm = lag.derivative_matrix();
    b.weak_diff.resize(n1, n1);
    for (int i = 0; i < n1; ++i)
      for (int p = 0; p < n1; ++p) b.weak_diff(i, p) = b.w1d[p] * dm[p][i];
    b.l_lo = lag.values(-1.0);
    b.l_hi = lag.values(1.0);
    b.hex_face_index.resize(6);
    for (int f = 0; f < 6; ++f) {
      const int d = f / 2;
      const int d1 = d == 0 ? 1 : 0;
      const int d2 = d == 2 ? 1 : 2;
      for (int code = 0; code < 8; ++code) {
        const auto pts = face_points(type, f, code, b.quad_rule);
        std::vector<int> idx;
        for (const auto& x : pts) idx.push_back(nearest_index(b.x1d, x[d1]) + n1 * nearest_index(b.x1d, x[d2]));
        b.hex_face_index[f].push_back(std::move(idx));
      }
    }
  }
  return b;
}

}  // namespace sfcb
