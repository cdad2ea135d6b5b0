#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "sfcb/errors.hpp"
#include "sfcb/kernel.hpp"
#include "sfcb/quadrature.hpp"

using namespace sfcb;

namespace {

std::shared_ptr<const Mesh> single_type_mesh(SplitTemplate t, int n = 2) {
  const Mesh base = generate_box_mesh(n, n, n, Box{});
  return std::make_shared<const Mesh>(split_to_mixed(base, std::vector<SplitTemplate>(base.n_elements(), t)));
}

std::shared_ptr<const Mesh> quarter_mesh(int n) {
  const Mesh base = generate_box_mesh(n, n, n, Box{});
  return std::make_shared<const Mesh>(split_to_mixed(base, quarter_assignment(base)));
}

double max_abs(const LocalSolver& s, double shift) {
  double m = 0.0;
  for (const auto& st : s.states()) m = std::max(m, (st.q_nodal.array() - shift).abs().maxCoeff());
  return m;
}

double sine(const Vec3& x) {
  const double k = 2 * std::numbers::pi;
  return std::sin(k * x[0]) * std::sin(k * x[1]) * std::sin(k * x[2]);
}

}  // namespace

TEST_CASE("modal projection and reconstruction") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (auto t : kAllElementTypes) {
    for (int n = 0; n <= 5; ++n) {
      for (bool hex_modal : {false, true}) {
        const auto b = build_basis(t, n, BasisOptions{hex_modal});
        const double jac = 0.37;
        CHECK(modal_project(Eigen::MatrixXd::Zero(b.n_nodes, 2), b, jac).cwiseAbs().maxCoeff() == 0.0);
        for (int k = 0; k < b.n_modes; k += std::max(1, b.n_modes / 7)) {
          const Eigen::MatrixXd e_k = Eigen::MatrixXd::Identity(b.n_modes, b.n_modes).col(k);
          CHECK((modal_project(b.V * e_k, b, jac) - e_k).cwiseAbs().maxCoeff() < 1e-10);
          CHECK((modal_reconstruct(e_k, b) - b.V.col(k)).cwiseAbs().maxCoeff() == 0.0);
        }
        Eigen::MatrixXd q(b.n_nodes, 3);
        for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = uni(rng);
        // Oracle: M^{-1} through a dense LU of the assembled physical mass.
        const Eigen::MatrixXd m = b.V.transpose() * b.w.asDiagonal() * b.V * jac;
        const Eigen::MatrixXd oracle = m.fullPivLu().solve(b.V.transpose() * b.w.asDiagonal() * q * jac);
        const Eigen::MatrixXd qm = modal_project(q, b, jac);
        CHECK((qm - oracle).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((modal_reconstruct(qm, b) - q).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((modal_project(modal_reconstruct(qm, b), b, jac) - qm).cwiseAbs().maxCoeff() < 1e-10);
      }
    }
  }
}

TEST_CASE("hex tensor volume kernel agrees with the dense weak derivative") {
  const auto mesh = std::make_shared<const Mesh>(generate_box_mesh(2, 1, 1, Box{Vec3(0, 0, 0), Vec3(2, 1, 3)}));
  KernelConfig kc;
  kc.degree = 4;
  kc.n_var = 2;
  kc.velocity = Vec3(0.3, -1.1, 0.7);
  Discretization d(mesh, kc);
  const auto& b = d.basis(ElementType::Hex);
  Eigen::MatrixXd q = Eigen::MatrixXd::Random(b.n_nodes, 2);
  Eigen::MatrixXd r;
  volume_kernel(d, 0, q, r);
  const auto& g = d.element(0);
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(b.n_nodes, 2);
  for (int k = 0; k < 3; ++k) dense += g.jacobian * g.contravariant[k] * b.stiffness[k] * q;
  CHECK((r - dense).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("zero velocity gives a zero volume residual") {
  const auto mesh = quarter_mesh(2);
  KernelConfig kc;
  kc.degree = 2;
  kc.velocity = Vec3::Zero();
  Discretization d(mesh, kc);
  for (std::size_t e = 0; e < d.n_elements(); ++e) {
    Eigen::MatrixXd q = Eigen::MatrixXd::Random(d.basis_of(e).n_nodes, 1);
    Eigen::MatrixXd r;
    volume_kernel(d, e, q, r);
    CHECK(r.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("N=1 hex with a linear field recovers -a . grad q") {
  Mesh m = generate_box_mesh(1, 1, 1, Box{Vec3(0, 0, 0), Vec3(2, 1, 1)});
  m.periodic = false;
  const auto mesh = std::make_shared<const Mesh>(build_side_connectivity(std::move(m)));
  REQUIRE(mesh->sides.size() == 6);
  for (const Vec3 a : {Vec3(1, 0, 0), Vec3(0.5, -2.0, 1.5)}) {
    KernelConfig kc;
    kc.degree = 1;
    kc.velocity = a;
    Discretization d(mesh, kc);
    const auto x = d.physical_nodes(0);
    Eigen::MatrixXd q(8, 1);
    const Vec3 grad(3.0, -1.0, 0.5);
    for (int p = 0; p < 8; ++p) q(p, 0) = grad.dot(x[p]) + 0.25;
    Eigen::MatrixXd r;
    volume_kernel(d, 0, q, r);
    for (int f = 0; f < 6; ++f) {
      Eigen::MatrixXd tr, flux;
      prolong_to_face(d, 0, f, 0, q, tr);
      const auto s = static_cast<std::size_t>(mesh->elem_sides[0][f]);
      side_flux(d, s, tr, tr, flux);
      lift_face(d, 0, f, 0, -1.0, flux, r);
    }
    const auto& b = d.basis(ElementType::Hex);
    for (int p = 0; p < 8; ++p) CHECK(r(p, 0) / (d.element(0).jacobian * b.w[p]) == doctest::Approx(-a.dot(grad)));
  }
}

TEST_CASE("upwind flux picks the master value when a.n > 0") {
  const auto mesh = std::make_shared<const Mesh>(generate_box_mesh(2, 1, 1, Box{}));
  KernelConfig kc;
  kc.degree = 1;
  kc.velocity = Vec3(1, 0, 0);
  Discretization d(mesh, kc);
  std::size_t interior = 0;
  for (std::size_t s = 0; s < mesh->sides.size(); ++s)
    if (!mesh->sides[s].periodic) interior = s;
  REQUIRE(d.side(interior).normal_velocity > 0.0);
  Eigen::MatrixXd um = Eigen::MatrixXd::Zero(4, 1), us = Eigen::MatrixXd::Ones(4, 1), f;
  side_flux(d, interior, um, us, f);
  CHECK(f.cwiseAbs().maxCoeff() == 0.0);
  side_flux(d, interior, us, um, f);
  CHECK(f.minCoeff() == doctest::Approx(1.0));
}

TEST_CASE("free-stream preservation and conservation on every element type") {
  const std::vector<std::shared_ptr<const Mesh>> meshes{
      std::make_shared<const Mesh>(generate_box_mesh(2, 2, 2, Box{})), single_type_mesh(SplitTemplate::Tets),
      single_type_mesh(SplitTemplate::Prisms), single_type_mesh(SplitTemplate::Pyramids), quarter_mesh(2)};
  for (const auto& mesh : meshes) {
    KernelConfig kc;
    kc.degree = 3;
    kc.n_var = 2;
    Discretization d(mesh, kc);
    const double dt = d.cfl_time_step(0.5);
    LocalSolver s(d, {0, static_cast<std::int64_t>(d.n_elements())}, 0);
    s.set_initial([](const Vec3&, int v) { return v == 0 ? 1.0 : -2.5; });
    for (int i = 0; i < 100; ++i) s.advance_timestep(LserkScheme::ck45(), dt, false, i);
    for (const auto& st : s.states()) {
      CHECK((st.q_nodal.col(0).array() - 1.0).abs().maxCoeff() < 1e-12);
      CHECK((st.q_nodal.col(1).array() + 2.5).abs().maxCoeff() < 1e-12);
    }

    LocalSolver w(d, {0, static_cast<std::int64_t>(d.n_elements())}, 0);
    w.set_initial([](const Vec3& x, int) { return sine(x) + 0.5 * x[0]; });
    const Eigen::VectorXd i0 = w.integral();
    for (int i = 0; i < 50; ++i) w.advance_timestep(LserkScheme::ck45(), dt, false, i);
    CHECK((w.integral() - i0).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("pure hex mesh spends no time in the modal section") {
  const auto mesh = std::make_shared<const Mesh>(generate_box_mesh(2, 2, 2, Box{}));
  KernelConfig kc;
  kc.degree = 2;
  Discretization d(mesh, kc);
  LocalSolver s(d, {0, 8}, 0);
  s.set_initial([](const Vec3& x, int) { return sine(x); });
  const TimerSet t = s.advance_timestep(LserkScheme::ck45(), d.cfl_time_step(0.5), true, 0);
  CHECK(t[Category::DgModal] == 0.0);
  CHECK(t[Category::DgElems] > 0.0);
  CHECK(t.n_modal_elems == 0);
}

TEST_CASE("non-finite state raises a divergence error with the step") {
  const auto mesh = std::make_shared<const Mesh>(generate_box_mesh(2, 2, 2, Box{}));
  KernelConfig kc;
  kc.degree = 1;
  Discretization d(mesh, kc);
  LocalSolver s(d, {0, 8}, 0);
  s.set_initial([](const Vec3&, int) { return 1.0; });
  s.states()[3].q_nodal(0, 0) = std::nan("");
  try {
    s.advance_timestep(LserkScheme::ck45(), 1e-3, false, 42);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.step() == 42);
  }
}

TEST_CASE("spatial convergence of the hex discretisation") {
  // Error against the exact translated sine after a short time; halving h at
  // fixed N=3 should gain roughly 2^(N+1).
  auto error = [](int n) {
    const auto mesh = std::make_shared<const Mesh>(generate_box_mesh(n, n, n, Box{}));
    KernelConfig kc;
    kc.degree = 3;
    Discretization d(mesh, kc);
    LocalSolver s(d, {0, static_cast<std::int64_t>(d.n_elements())}, 0);
    s.set_initial([](const Vec3& x, int) { return sine(x); });
    const double t_end = 0.05;
    const int steps = static_cast<int>(std::ceil(t_end / d.cfl_time_step(0.25)));
    for (int i = 0; i < steps; ++i) s.advance_timestep(LserkScheme::ck45(), t_end / steps, false, i);
    double err2 = 0.0;
    for (std::size_t e = 0; e < d.n_elements(); ++e) {
      const auto x = d.physical_nodes(e);
      const auto& b = d.basis_of(e);
      for (std::size_t p = 0; p < x.size(); ++p) {
        const double diff = s.states()[e].q_nodal(static_cast<Eigen::Index>(p), 0) - sine(x[p] - kc.velocity * t_end);
        err2 += d.element(e).jacobian * b.w[static_cast<Eigen::Index>(p)] * diff * diff;
      }
    }
    return std::sqrt(err2);
  };
  const double e2 = error(2), e4 = error(4);
  MESSAGE("L2 error 2^3: " << e2 << ", 4^3: " << e4 << ", rate " << std::log2(e2 / e4));
  CHECK(std::log2(e2 / e4) > 3.0);
}
