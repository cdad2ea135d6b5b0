#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sfcb/errors.hpp"
#include "sfcb/kernel.hpp"
#include "sfcb/lserk.hpp"

using namespace sfcb;

namespace {

// y' = -y + cos(t), driven through the 2N-storage recurrence.
double integrate_scalar(const LserkScheme& s, int steps, double t_end) {
  const double dt = t_end / steps;
  double y = 1.0, du = 0.0, t = 0.0;
  for (int n = 0; n < steps; ++n) {
    for (int k = 0; k < s.n_stages(); ++k) {
      const double tk = t + s.c[static_cast<std::size_t>(k)] * dt;
      du = s.a[static_cast<std::size_t>(k)] * du + dt * (-y + std::cos(tk));
      y += s.b[static_cast<std::size_t>(k)] * du;
    }
    t += dt;
  }
  return y;
}

double exact_scalar(double t) {
  // y = (cos t + sin t)/2 + e^{-t}/2 with y(0) = 1.
  return 0.5 * (std::cos(t) + std::sin(t)) + 0.5 * std::exp(-t);
}

Eigen::MatrixXd flatten(const LocalSolver& s) {
  Eigen::Index total = 0;
  for (const auto& st : s.states()) total += st.q_nodal.size();
  Eigen::MatrixXd out(total, 1);
  Eigen::Index at = 0;
  for (const auto& st : s.states()) {
    out.middleRows(at, st.q_nodal.size()) = st.q_nodal.reshaped();
    at += st.q_nodal.size();
  }
  return out;
}

}  // namespace

TEST_CASE("scheme tables") {
  const auto ck = LserkScheme::ck45();
  CHECK(ck.n_stages() == 5);
  CHECK(ck.order == 4);
  CHECK(ck.a[0] == 0.0);
  CHECK(ck.c[0] == 0.0);
  const auto w3 = LserkScheme::williamson3();
  CHECK(w3.n_stages() == 3);
  CHECK(LserkScheme::by_name("ck45").name == "ck45");
  CHECK_THROWS_AS(LserkScheme::by_name("rk4"), ConfigError);
}

TEST_CASE("observed order on a scalar ODE") {
  for (const auto& s : {LserkScheme::ck45(), LserkScheme::williamson3()}) {
    CAPTURE(s.name);
    const double e1 = std::abs(integrate_scalar(s, 20, 2.0) - exact_scalar(2.0));
    const double e2 = std::abs(integrate_scalar(s, 40, 2.0) - exact_scalar(2.0));
    const double e3 = std::abs(integrate_scalar(s, 80, 2.0) - exact_scalar(2.0));
    CHECK(std::log2(e1 / e2) == doctest::Approx(s.order).epsilon(0.05));
    CHECK(std::log2(e2 / e3) == doctest::Approx(s.order).epsilon(0.05));
  }
}

TEST_CASE("temporal order of the DG time loop") {
  // Same mesh and degree for every run, so the spatial error cancels against
  // a fine-step reference and only the time error remains.
  const auto mesh = std::make_shared<const Mesh>(generate_box_mesh(4, 4, 4, Box{}));
  KernelConfig kc;
  kc.degree = 3;
  Discretization d(mesh, kc);
  const double t_end = 0.2;
  auto solve = [&](int steps) {
    LocalSolver s(d, {0, static_cast<std::int64_t>(d.n_elements())}, 0);
    s.set_initial([](const Vec3& x, int) {
      const double k = 2 * std::numbers::pi;
      return std::sin(k * x[0]) * std::sin(k * x[1]) * std::sin(k * x[2]);
    });
    for (int i = 0; i < steps; ++i) s.advance_timestep(LserkScheme::ck45(), t_end / steps, false, i);
    return flatten(s);
  };
  const int base = static_cast<int>(std::ceil(t_end / d.cfl_time_step(1.0)));
  const auto ref = solve(base * 32);
  std::vector<double> err;
  for (int f : {1, 2, 4}) err.push_back((solve(base * f) - ref).lpNorm<Eigen::Infinity>());
  MESSAGE("errors " << err[0] << " " << err[1] << " " << err[2]);
  CHECK(std::log2(err[0] / err[1]) == doctest::Approx(4.0).epsilon(0.05));
  CHECK(std::log2(err[1] / err[2]) == doctest::Approx(4.0).epsilon(0.05));
}
