#include "sfcb/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sfcb::quad {

LegendreValue legendre(int n, double x) {
  if (n < 0) throw std::invalid_argument("legendre degree must be >= 0");
  double p0 = 1.0, p1 = x, d0 = 0.0, d1 = 1.0;
  if (n == 0) return {1.0, 0.0};
  for (int k = 1; k < n; ++k) {
    const double p2 = ((2 * k + 1) * x * p1 - k * p0) / (k + 1);
    const double d2 = d0 + (2 * k + 1) * p1;
    p0 = p1;
    p1 = p2;
    d0 = d1;
    d1 = d2;
  }
  return {p1, d1};
}

Rule1D gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("Gauss rule needs at least one point");
  Rule1D r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre(n, x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double dp = legendre(n, x).dp;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.x[i] = -x;
    r.x[n - 1 - i] = x;
    r.w[i] = r.w[n - 1 - i] = w;
  }
  if (n % 2 == 1) r.x[n / 2] = 0.0;
  return r;
}

Rule1D gauss_legendre_unit(int n) {
  Rule1D r = gauss_legendre(n);
  for (int i = 0; i < n; ++i) {
    r.x[i] = 0.5 * (r.x[i] + 1.0);
    r.w[i] *= 0.5;
  }
  return r;
}

Lagrange1D::Lagrange1D(std::vector<double> nodes) : x_(std::move(nodes)), lambda_(x_.size(), 1.0) {
  for (std::size_t i = 0; i < x_.size(); ++i)
    for (std::size_t j = 0; j < x_.size(); ++j)
      if (i != j) lambda_[i] /= (x_[i] - x_[j]);
}

std::vector<double> Lagrange1D::values(double t) const {
  const std::size_t n = x_.size();
  std::vector<double> v(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (t == x_[i]) {
      v[i] = 1.0;
      return v;
    }
  }
  double denom = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = lambda_[i] / (t - x_[i]);
    denom += v[i];
  }
  for (auto& vi : v) vi /= denom;
  return v;
}

std::vector<std::vector<double>> Lagrange1D::derivative_matrix() const {
  const std::size_t n = x_.size();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (std::size_t p = 0; p < n; ++p) {
    double diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == p) continue;
      d[p][i] = (lambda_[i] / lambda_[p]) / (x_[p] - x_[i]);
      diag -= d[p][i];
    }
    d[p][p] = diag;
  }
  return d;
}

Vec3 collapse(ElementType type, double a, double b, double c) {
  switch (type) {
    case ElementType::Hex: return {2 * a - 1, 2 * b - 1, 2 * c - 1};
    case ElementType::Tet: return {a, b * (1 - a), c * (1 - a) * (1 - b)};
    case ElementType::Prism: return {a, b * (1 - a), c};
    case ElementType::Pyramid: return {(2 * a - 1) * (1 - c), (2 * b - 1) * (1 - c), c};
  }
  return Vec3::Zero();
}

double collapse_jacobian(ElementType type, double a, double b, double c) {
  switch (type) {
    case ElementType::Hex: return 8.0;
    case ElementType::Tet: return (1 - a) * (1 - a) * (1 - b);
    case ElementType::Prism: return 1 - a;
    case ElementType::Pyramid: return 4 * (1 - c) * (1 - c);
  }
  return 0.0;
}

PointSet volume_rule(ElementType type, int m) {
  const Rule1D g = gauss_legendre_unit(m);
  PointSet ps;
  ps.x.reserve(static_cast<std::size_t>(m) * m * m);
  ps.w.reserve(ps.x.capacity());
  for (int k = 0; k < m; ++k)
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) {
        const double a = g.x[i], b = g.x[j], c = g.x[k];
        ps.x.push_back(collapse(type, a, b, c));
        ps.w.push_back(g.w[i] * g.w[j] * g.w[k] * collapse_jacobian(type, a, b, c));
      }
  return ps;
}

double radical_inverse(unsigned long i, unsigned base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

FaceRule face_rule(int n_vertices, int m) {
  if (n_vertices != 3 && n_vertices != 4) throw std::invalid_argument("faces have 3 or 4 vertices");
  const Rule1D g = gauss_legendre_unit(m);
  FaceRule r;
  r.n_vertices = n_vertices;
  double total = 0.0;
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) {
      const double s = g.x[i], t = g.x[j];
      if (n_vertices == 4) {
        r.lambda.push_back({(1 - s) * (1 - t), s * (1 - t), s * t, (1 - s) * t});
        r.w.push_back(g.w[i] * g.w[j]);
      } else {
        const double y = t * (1 - s);
        r.lambda.push_back({1 - s - y, s, y, 0.0});
        r.w.push_back(g.w[i] * g.w[j] * (1 - s));
      }
      total += r.w.back();
    }
  for (auto& w : r.w) w /= total;
  return r;
}

}  // namespace sfcb::quad
