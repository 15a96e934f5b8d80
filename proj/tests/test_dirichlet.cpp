#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "sdhom/dirichlet.hpp"
#include "sdhom/fields.hpp"

using namespace sdhom;

namespace {

Point pt(double a) { return Point::Constant(1, a); }

OmegaLagrangian unit_linear(int dim = 1) {
  return lagrangian_from_field(two_phase_field(FieldKind::linear, dim, 2.0, 1.0, 1.0));
}

OmegaLagrangian two_phase(double p = 2.0) {
  return lagrangian_from_field(two_phase_field(p == 2.0 ? FieldKind::linear : FieldKind::power, 1, p, 1.0, 4.0));
}

// Direct solve of the discrete linear PDE -div(a Du) = f with the standard
// three-point stencil, coefficients taken at cell midpoints.
Eigen::VectorXd tridiagonal_oracle(const Eigen::VectorXd& coeff, const Eigen::VectorXd& rhs, double h) {
  const Index M = rhs.size();
  Eigen::VectorXd lower(M), diag(M), upper(M), r = rhs * h * h, x(M);
  for (Index i = 0; i < M; ++i) {
    lower[i] = -coeff[i];
    upper[i] = -coeff[i + 1];
    diag[i] = coeff[i] + coeff[i + 1];
  }
  for (Index i = 1; i < M; ++i) {
    const double m = lower[i] / diag[i - 1];
    diag[i] -= m * upper[i - 1];
    r[i] -= m * r[i - 1];
  }
  x[M - 1] = r[M - 1] / diag[M - 1];
  for (Index i = M - 2; i >= 0; --i) x[i] = (r[i] - upper[i] * x[i + 1]) / diag[i];
  return x;
}

}  // namespace

TEST_CASE("discrete integration by parts and projections") {
  for (int dim : {1, 2}) {
    const DirichletOperators ops(DirichletMesh(dim, 9));
    std::mt19937 rng(5);
    std::normal_distribution<double> n01;
    Eigen::VectorXd u(ops.mesh().node_count());
    for (auto& v : u) v = n01(rng);
    Eigen::MatrixXd f(dim, ops.mesh().element_count());
    for (Index i = 0; i < f.size(); ++i) f.data()[i] = n01(rng);
    CHECK(std::abs(ops.inner_elements(ops.gradient(u), f) - ops.inner_nodes(u, ops.neg_divergence(f))) <= 1e-10);
    Eigen::MatrixXd r = f, k = f;
    ops.project_range(r);
    ops.project_kernel(k);
    CHECK((r + k - f).norm() <= 1e-10);
    CHECK(std::abs(ops.inner_elements(r, k)) <= 1e-10);
    CHECK(ops.neg_divergence(k).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((ops.gradient(ops.potential(ops.gradient(u))) - ops.gradient(u)).norm() <= 1e-9);
  }
}

TEST_CASE("particular flux") {
  const DirichletOperators ops(DirichletMesh(1, 63));
  const auto f0 = particular_flux(ops, Eigen::VectorXd::Ones(63));
  const auto x = ops.mesh().centroids();
  for (Index e = 0; e < x.cols(); ++e) CHECK(std::abs(f0.f(0, e) - (0.5 - x(0, e))) <= 1e-10);
  CHECK(std::abs(f0.f.sum()) <= 1e-10);
  CHECK(particular_flux(ops, Eigen::VectorXd::Zero(63)).f.cwiseAbs().maxCoeff() == 0.0);

  const DirichletOperators ops2(DirichletMesh(2, 31));
  const auto nodes = ops2.mesh().nodes();
  Eigen::VectorXd s(nodes.cols());
  for (Index n = 0; n < nodes.cols(); ++n)
    s[n] = std::sin(std::numbers::pi * nodes(0, n)) * std::sin(std::numbers::pi * nodes(1, n));
  const auto f2 = particular_flux(ops2, s);
  CHECK((ops2.neg_divergence(f2.f) - s).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((f2.divergence - s).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("lifted value") {
  const auto L = unit_linear();
  const DirichletMesh mesh(1, 31);
  const auto x = mesh.nodes();
  const Eigen::VectorXd u = (x.row(0).array() * (1.0 - x.row(0).array()) / 2.0).transpose();
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(31);
  const DirichletOperators ops(mesh);
  CHECK(std::abs(lifted_value(L, mesh, u, one) - ops.inner_nodes(u, one)) <= 1e-6);
  CHECK(std::abs(lifted_value(L, mesh, Eigen::VectorXd::Zero(31), Eigen::VectorXd::Zero(31))) <= 1e-14);

  std::mt19937 rng(11);
  std::normal_distribution<double> n01;
  const auto Lt = two_phase();
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd a(31), b(31);
    for (Index i = 0; i < 31; ++i) {
      a[i] = 0.3 * n01(rng);
      b[i] = n01(rng);
    }
    CHECK(lifted_value(Lt, mesh, a, b) >= ops.inner_nodes(a, b) - 1e-9);
  }
}

TEST_CASE("constant coefficient solve reproduces x(1-x)/2") {
  const DirichletMesh mesh(1, 255);
  const auto report = solve_dirichlet(unit_linear(), mesh, Eigen::VectorXd::Ones(255));
  const auto x = mesh.nodes();
  double err = 0.0;
  for (Index i = 0; i < x.cols(); ++i) err = std::max(err, std::abs(report.u[i] - x(0, i) * (1 - x(0, i)) / 2));
  CHECK(err <= 1e-6);
  CHECK(report.gap >= -1e-10);
  CHECK(report.gap <= 1e-6);
  CHECK(std::abs(report.u.maxCoeff() - 0.125) <= 1e-4);
  CHECK((report.flux.divergence - Eigen::VectorXd::Ones(255)).cwiseAbs().maxCoeff() <= 1e-10);

  const auto zero = solve_dirichlet(unit_linear(), mesh, Eigen::VectorXd::Zero(255));
  CHECK(zero.u.cwiseAbs().maxCoeff() == 0.0);
  CHECK(zero.gap == 0.0);
}

TEST_CASE("oscillating two-phase solve: flux balance and direct linear solve") {
  const double eps = 1.0 / 64.0;
  const DirichletMesh mesh(1, 1023);
  DirichletOptions opt;
  opt.eps = eps;
  const DirichletProblem problem(two_phase(), mesh, opt);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1023);
  const auto report = problem.solve(one);
  CHECK(report.gap <= 1e-6);
  CHECK(report.gap >= -1e-10);
  const auto xc = mesh.centroids();
  for (Index e = 1; e < xc.cols(); ++e)
    CHECK(std::abs(report.flux.f(0, e) - (report.flux.f(0, 0) - (xc(0, e) - xc(0, 0)))) <= 1e-6);
  Eigen::VectorXd coeff(xc.cols());
  for (Index e = 0; e < xc.cols(); ++e) {
    const double y = xc(0, e) / eps - std::floor(xc(0, e) / eps);
    coeff[e] = y < 0.5 ? 1.0 : 4.0;
  }
  const auto direct = tridiagonal_oracle(coeff, one, mesh.spacing());
  CHECK((report.u - direct).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(report.max_local_gap <= 1e-6);
}

TEST_CASE("2D solve with constant coefficient matches the discrete Poisson solution") {
  const DirichletMesh mesh(2, 15);
  const DirichletOperators ops(mesh);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(mesh.node_count());
  const auto report = solve_dirichlet(unit_linear(2), mesh, one);
  CHECK(report.gap <= 1e-6);
  CHECK((report.u - ops.poisson(one)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("p = 3 solve certifies with a small gap") {
  const DirichletMesh mesh(1, 127);
  DirichletOptions opt;
  opt.p = 3.0;
  opt.eps = 0.25;
  const auto report = solve_dirichlet(two_phase(3.0), mesh, Eigen::VectorXd::Ones(127), opt);
  CHECK(report.gap <= 1e-4);
  CHECK(report.gap >= -1e-10);
}

TEST_CASE("translation covariance: shifting by the particular flux") {
  const DirichletMesh mesh(1, 63);
  DirichletOptions opt;
  opt.eps = 0.25;
  const auto L = two_phase();
  const DirichletProblem base(L, mesh, opt);
  Eigen::VectorXd src(63);
  for (Index i = 0; i < 63; ++i) src[i] = std::sin(0.3 * static_cast<double>(i));
  const auto f0 = particular_flux(base.operators(), src);
  const DirichletProblem shifted(base.sampled().shifted(f0.f), mesh, opt);
  const auto r1 = base.solve(src);
  const auto r2 = shifted.solve(Eigen::VectorXd::Zero(63));
  CHECK((r1.u - r2.u).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(std::abs(r1.gap - r2.gap) <= 1e-9);
}

TEST_CASE("missing growth record") {
  const auto L = OmegaLagrangian::uniform(std::make_shared<PotentialLagrangian>(1, 1.0, 2.0));
  CHECK_THROWS_AS(DirichletProblem(L, DirichletMesh(1, 15)), Error);
}

TEST_CASE("graph projection") {
  const PotentialLagrangian q(1, 1.0, 2.0);
  const auto p = brl_project(q, pt(1.0), pt(0.0));
  CHECK(std::abs(p.u[0] - 0.5) <= 1e-10);
  CHECK(std::abs(p.u_star[0] - 0.5) <= 1e-10);
  CHECK(std::abs(p.eps - 0.5) <= 1e-15);
  CHECK(std::abs(p.distance_u - std::sqrt(0.5) / std::sqrt(2.0)) <= 1e-10);
  CHECK(std::abs(std::hypot(p.u[0] - 1.0, p.u_star[0]) - std::sqrt(0.5)) <= 1e-10);

  const DirichletMesh mesh(1, 31);
  DirichletOptions opt;
  opt.eps = 0.25;
  const DirichletProblem problem(two_phase(), mesh, opt);
  const auto sol = problem.solve(Eigen::VectorXd::Ones(31));
  const auto same = brl_project(problem, sol.u, Eigen::VectorXd::Ones(31));
  CHECK(same.distance_u <= 1e-6);

  std::mt19937 rng(3);
  std::normal_distribution<double> n01;
  for (int t = 0; t < 5; ++t) {
    Eigen::VectorXd du(31), ds(31);
    for (Index i = 0; i < 31; ++i) {
      du[i] = 0.05 * n01(rng);
      ds[i] = 0.5 * n01(rng);
    }
    const auto r = brl_project(problem, sol.u + du, Eigen::VectorXd::Ones(31) + ds);
    CHECK(r.distance_u <= std::sqrt(r.eps) + 1e-8);
    CHECK(r.value_change <= r.value_bound + 1e-8);
    CHECK(std::abs(r.gap) <= 1e-8);
  }
}
