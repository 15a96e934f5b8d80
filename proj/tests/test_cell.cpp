#include <doctest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "sdhom/cell.hpp"

using namespace sdhom;

namespace {

Point pt(double a) { return Point::Constant(1, a); }

Point pt(double a, double b) {
  Point p(2);
  p << a, b;
  return p;
}

OmegaLagrangian two_phase(int dim = 1, double p = 2.0, double first = 1.0, double second = 4.0) {
  return lagrangian_from_field(two_phase_field(p == 2.0 ? FieldKind::linear : FieldKind::power, dim, p, first, second));
}

// Independent closed form of the 1D two-phase linear cell problem:
// L_hom(a, b) = a_h a^2 / 2 + b^2 / (2 a_arith^-1 ...) with harmonic and
// arithmetic means of the coefficient and of its inverse.
double two_phase_oracle(double a, double b) {
  const double harmonic = 1.0 / (0.5 * (1.0 + 0.25));
  const double inv_mean = 0.5 * (1.0 + 0.25);
  return harmonic * a * a / 2.0 + inv_mean * b * b / 2.0;
}

}  // namespace

TEST_CASE("two-phase linear cell values match the harmonic-mean closed form") {
  const auto L = two_phase();
  const CellGrid grid(1, 256);
  const CellProblem problem(L, grid);
  const auto s = problem.solve(pt(1.0), pt(0.0));
  CHECK(std::abs(s.value - 0.8) <= 1e-4);
  CHECK(s.kkt_residual <= 1e-6);
  CHECK(std::abs(s.corrector.phi.mean()) <= 1e-12);
  CHECK(s.corrector.g.cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(std::abs(problem.solve(pt(1.0), pt(1.6)).value - 1.6) <= 1e-4);
  for (double a : {-1.5, 0.3, 2.0})
    for (double b : {-1.0, 0.0, 0.7}) CHECK(std::abs(problem.solve(pt(a), pt(b)).value - two_phase_oracle(a, b)) <= 1e-8);
  // Flux a(x)(1 + phi') is constant across the cell.
  const Eigen::MatrixXd flux = (s.gradient.array() + 1.0).matrix();
  const auto centers = grid.centers();
  double lo = kInfinity, hi = -kInfinity;
  for (Index k = 0; k < grid.size(); ++k) {
    const double c = centers(0, k) < 0.5 ? 1.0 : 4.0;
    lo = std::min(lo, c * flux(0, k));
    hi = std::max(hi, c * flux(0, k));
  }
  CHECK(std::abs(lo - 1.6) <= 1e-6);
  CHECK(std::abs(hi - 1.6) <= 1e-6);
}

TEST_CASE("x-independent Lagrangians need no corrector") {
  const auto L = OmegaLagrangian::uniform(std::make_shared<PotentialLagrangian>(1, 1.0, 3.0));
  const CellProblem problem(L, CellGrid(1, 32));
  for (double a : {-1.0, 0.5, 1.2}) {
    const auto s = problem.solve(pt(a), pt(0.4));
    CHECK(std::abs(s.value - L.value(pt(0.1), pt(a), pt(0.4))) <= 1e-9);
  }
}

TEST_CASE("adding a constant to L shifts L_hom by the constant") {
  const auto L = two_phase();
  const CellGrid grid(1, 64);
  const auto base = solve_cell(L, pt(0.7), pt(-0.2), grid);
  const auto shifted = solve_cell(L.plus_constant(0.375), pt(0.7), pt(-0.2), grid);
  CHECK(std::abs(shifted.value - base.value - 0.375) <= 1e-10);
}

TEST_CASE("p = 3 two-phase cell matches the p-harmonic mean") {
  const auto L = two_phase(1, 3.0, 1.0, 4.0);
  const CellGrid grid(1, 256);
  CellOptions opt;
  opt.p = 3.0;
  const double a_hom = 16.0 / 9.0;
  for (double b : {0.0, 0.5}) {
    const auto s = solve_cell(L, pt(1.0), pt(b), grid, opt);
    CHECK(std::abs(s.value - (a_hom / 3.0 + 0.75 * std::pow(b, 1.5) / 1.5)) <= 1e-4);
  }
  const auto psi = psi_hom(OmegaPotential::from_field(two_phase_field(FieldKind::power, 1, 3.0, 1.0, 4.0)), pt(1.0),
                           grid, opt);
  CHECK(std::abs(psi.value - a_hom / 3.0) <= 1e-4);
}

TEST_CASE("2D laminate: harmonic mean across layers, arithmetic mean along them") {
  const auto L = two_phase(2);
  const CellGrid grid(2, 16);
  const CellProblem problem(L, grid);
  CHECK(std::abs(problem.solve(pt(1.0, 0.0), pt(0.0, 0.0)).value - 0.8) <= 1e-6);
  CHECK(std::abs(problem.solve(pt(0.0, 1.0), pt(0.0, 0.0)).value - 1.25) <= 1e-6);
  // b-part: the mean of 1/a along layers, the inverse of the mean of a across them.
  CHECK(std::abs(problem.solve(pt(0.0, 0.0), pt(1.0, 0.0)).value - 0.5 * 0.625) <= 1e-6);
  CHECK(std::abs(problem.solve(pt(0.0, 0.0), pt(0.0, 1.0)).value - 0.5 / 2.5) <= 1e-6);
  const auto psi = psi_hom(OmegaPotential::from_field(two_phase_field(FieldKind::linear, 2, 2.0, 1.0, 4.0)),
                           pt(0.0, 1.0), grid);
  CHECK(std::abs(psi.value - 1.25) <= 1e-6);
}

TEST_CASE("tabulated two-phase table: graph, selfduality, bounds, dual routes, averaging") {
  const auto L = two_phase();
  const CellGrid grid(1, 64);
  const BoxGrid box(1, 2.0, 65);
  const auto start = std::chrono::steady_clock::now();
  TabulateOptions opt;
  auto hom = tabulate_hom(L, box, box, grid, opt);
  for (Index i = 0; i < hom.table.size(); ++i) {
    const Point z = hom.table.node(i);
    CHECK(std::abs(hom.table[i] - two_phase_oracle(z[0], z[1])) <= 1e-9);
  }
  CHECK(hom.selfdual.passed());
  CHECK(hom.bounds.passed());
  const auto graph = beta_hom_extract(hom.table);
  CHECK(std::abs(graph.slope() - 1.6) <= 1e-3);

  LagrangianGrowth growth{0.2, 3.0, 2.0, 0.0, 0.0};
  CHECK(hom_bounds_check(hom.table, growth, &L, &grid).violations == 0);
  TabulatedFunction corrupt = hom.table;
  corrupt.values()[100] += 50.0;
  const auto bad = hom_bounds_check(corrupt, growth, &L, &grid);
  REQUIRE(bad.violations == 1);
  CHECK(bad.flagged[0] == 100);
  CHECK((bad.worst_node - hom.table.node(100)).norm() == 0.0);

  const auto dual = dual_cell_check(L, hom);
  CHECK(dual.nodes_compared > 0);
  CHECK(dual.passed());
  MESSAGE("dual discrepancy " << dual.max_discrepancy << " coverage " << dual.coverage);

  const CellProblem problem(L, grid);
  const auto avg = subdiff_average(problem, problem.solve(pt(1.0), pt(0.0)));
  CHECK(std::abs(avg.da[0] - 1.6) <= 1e-3);
  CHECK(std::abs(avg.db[0]) <= 1e-3);
  CHECK_FALSE(avg.set_valued);
  MESSAGE("table wall time " << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
}

TEST_CASE("averaged subgradients match finite differences of the table at random nodes") {
  const auto L = two_phase(1, 3.0, 1.0, 4.0);
  const CellGrid grid(1, 64);
  CellOptions opt;
  opt.p = 3.0;
  const CellProblem problem(L, grid, opt);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  const double h = 1e-4;
  for (int t = 0; t < 5; ++t) {
    const double a = u(rng), b = u(rng);
    const auto avg = subdiff_average(problem, problem.solve(pt(a), pt(b)));
    const double fa = (problem.solve(pt(a + h), pt(b)).value - problem.solve(pt(a - h), pt(b)).value) / (2 * h);
    const double fb = (problem.solve(pt(a), pt(b + h)).value - problem.solve(pt(a), pt(b - h)).value) / (2 * h);
    CHECK(std::abs(avg.da[0] - fa) <= 1e-3);
    CHECK(std::abs(avg.db[0] - fb) <= 1e-3);
  }
}
