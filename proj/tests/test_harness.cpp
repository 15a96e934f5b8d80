#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sdhom/fields.hpp"
#include "sdhom/harness.hpp"

using namespace sdhom;

namespace {

Point pt(double a) { return Point::Constant(1, a); }

OmegaLagrangian two_phase() { return lagrangian_from_field(two_phase_field(FieldKind::linear, 1, 2.0, 1.0, 4.0)); }

const HomLagrangian& two_phase_hom() {
  static const HomLagrangian hom = [] {
    const BoxGrid box(1, 2.0, 65);
    return tabulate_hom(two_phase(), box, box, CellGrid(1, 64));
  }();
  return hom;
}

}  // namespace

TEST_CASE("source parsing") {
  CHECK(Source::parse("const:2").scale == 2.0);
  CHECK(Source::parse("sin:-1.5").kind == Source::Kind::sine);
  CHECK_THROWS_AS(Source::parse("cos:1"), Error);
  CHECK_THROWS_AS(Source::parse("const:1x"), Error);
  const DirichletMesh mesh(1, 15);
  const auto v = Source::parse("sin:2").evaluate(mesh);
  CHECK(std::abs(v[7] - 2.0 * std::sin(std::numbers::pi * 0.5)) <= 1e-15);
}

TEST_CASE("schedule validation") {
  EpsSchedule s;
  CHECK_NOTHROW(s.validate());
  s.inverse_eps = {4, 12};
  CHECK_THROWS_AS(s.validate(), Error);
  s.inverse_eps = {8, 4};
  CHECK_THROWS_AS(s.validate(), Error);
  s.inverse_eps = {64};
  s.elements = 256;
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("rate fit recovers a power law") {
  std::vector<double> eps{0.25, 0.125, 0.0625, 0.03125};
  std::vector<double> v;
  for (double e : eps) v.push_back(3.0 * e * std::sqrt(e));
  CHECK(std::abs(fit_rate(eps, v) - 1.5) <= 1e-12);
  CHECK(std::isinf(fit_rate(eps, std::vector<double>(4, 0.0))));
}

TEST_CASE("two-phase sweep converges at first order to x(1-x)/3.2") {
  SweepOptions opt;
  const auto report = eps_sweep(two_phase(), two_phase_hom(), Source::parse("const:1"), EpsSchedule{}, opt);
  CHECK(std::abs(report.u_hom_max - 0.078125) <= 1e-4);
  CHECK(report.all_certified);
  CHECK(report.rate_u >= 0.9);
  CHECK(report.rate_flux >= 0.9);
  for (const auto& r : report.records) {
    CHECK(r.div_residual <= 1e-8);
    MESSAGE("eps " << r.eps << " err " << r.err_u << " flux " << r.flux.weak_max() << " strong " << r.flux.strong);
  }
  // Strong surrogate shrinks with eps as well.
  CHECK(report.records.back().flux.strong < report.records.front().flux.strong);
}

TEST_CASE("x-independent field: every eps reproduces the homogenized solution") {
  const auto L = lagrangian_from_field(two_phase_field(FieldKind::linear, 1, 2.0, 2.0, 2.0));
  const BoxGrid box(1, 2.0, 33);
  const auto hom = tabulate_hom(L, box, box, CellGrid(1, 16));
  EpsSchedule s;
  s.inverse_eps = {4, 8, 16};
  s.elements = 256;
  const auto report = eps_sweep(L, hom, Source::parse("sin:1"), s);
  for (const auto& r : report.records) CHECK(r.err_u <= 1e-7);
}

TEST_CASE("affine recovery on the torus reproduces L_hom") {
  const auto L = two_phase();
  for (double a : {1.0, -0.5})
    for (double b : {0.0, 0.7}) {
      const double value = affine_recovery_value(L, pt(a), pt(b), 1.0 / 16.0, 512);
      CHECK(std::abs(value - (0.8 * a * a + 0.3125 * b * b)) <= 1e-3);
    }
}

TEST_CASE("recovery sequence and liminf margins") {
  const auto L = two_phase();
  const auto& hom = two_phase_hom();
  const EpsSchedule schedule;
  const auto report = eps_sweep(L, hom, Source::parse("const:1"), schedule);
  const DirichletMesh mesh = schedule.mesh();
  const auto H = hom_field(hom);

  std::vector<double> margins;
  for (std::size_t i = 2; i < schedule.inverse_eps.size(); ++i) {
    const auto bank = CorrectorBank::build(L, report.hom, mesh, schedule.eps(i));
    const auto rec = recovery_sequence(report.hom, H, L, bank);
    margins.push_back(std::abs(rec.margin));
    MESSAGE("eps " << schedule.eps(i) << " recovery margin " << rec.margin);
  }
  CHECK(margins.back() < margins.front());
  CHECK(margins.back() <= 5e-3);

  std::vector<LiminfEntry> sequence;
  for (const auto& r : report.records) sequence.push_back({r.eps, r.solution.u, r.solution.flux.f});
  const auto lim = liminf_check(L, H, mesh, sequence, report.hom.u, report.hom.flux.f);
  for (std::size_t i = 0; i < lim.eps.size(); ++i)
    if (lim.eps[i] <= 1.0 / 16.0) CHECK(lim.margin[i] >= -1e-4);

  // A wrong limit makes the inequality fail, so the check has teeth.
  const Eigen::VectorXd wrong = 2.0 * report.hom.u;
  const auto bad = liminf_check(L, H, mesh, sequence, wrong, report.hom.flux.f);
  for (double m : bad.margin) CHECK(m < -1e-3);

  SolverReport other = report.hom;
  other.u = Eigen::VectorXd::Zero(10);
  const auto bank = CorrectorBank::build(L, report.hom, mesh, 1.0 / 16.0);
  CHECK_THROWS_AS(recovery_sequence(other, H, L, bank), Error);
}

TEST_CASE("graph convergence at rate one half with monotone pairs") {
  const auto report = graph_convergence_check(two_phase(), two_phase_hom(), EpsSchedule{});
  for (std::size_t i = 0; i < report.eps.size(); ++i)
    MESSAGE("eps " << report.eps[i] << " gap " << report.gap[i] << " distance " << report.distance[i]);
  CHECK(report.rate >= 0.45);
  CHECK(report.bound_excess <= 1e-6);
  CHECK(report.monotone_checks == 100);
  CHECK(report.monotone_violations == 0);
}

TEST_CASE("Riemann-Lebesgue deviations") {
  const std::vector<int> n{4, 8, 16, 32, 64};
  const auto smooth = riemann_lebesgue_test([](double y) { return std::sin(2 * std::numbers::pi * y); },
                                            [](double) { return 1.0; }, n);
  for (double d : smooth.deviation) CHECK(d <= 1e-12);
  // int x^2 sin(2 pi x / eps) dx = -eps / (2 pi).
  const auto weighted = riemann_lebesgue_test([](double y) { return std::sin(2 * std::numbers::pi * y); },
                                              [](double x) { return x * x; }, n);
  for (std::size_t i = 0; i < n.size(); ++i)
    CHECK(std::abs(weighted.deviation[i] - weighted.eps[i] / (2 * std::numbers::pi)) <= 1e-3 * weighted.eps[i]);
  CHECK(std::abs(weighted.rate - 1.0) <= 1e-3);

  const auto indicator = riemann_lebesgue_test([](double y) { return y < 0.5 ? 1.0 : 0.0; },
                                               [](double x) { return x; }, n);
  for (std::size_t i = 0; i < n.size(); ++i)
    CHECK(std::abs(indicator.deviation[i] - indicator.eps[i] / 8.0) <= 1e-12);
  CHECK(std::abs(indicator.rate - 1.0) <= 1e-9);

  const auto flat = riemann_lebesgue_test([](double) { return 3.0; }, [](double x) { return std::exp(x); }, n);
  for (double d : flat.deviation) CHECK(d <= 1e-12);
}

TEST_CASE("Jensen-type bound over constant fluxes") {
  const PotentialLagrangian L(1, 1.0, 2.0);
  const auto single = jensen_bound_test(L, {{1.0, 0.8, 0.0}});
  CHECK(std::abs(single.lhs - 0.32) <= 1e-9);
  CHECK(std::abs(single.margin) <= 1e-9);
  const auto two = jensen_bound_test(L, {{0.5, 0.8, -0.6}, {0.5, -0.3, 0.9}});
  CHECK(two.margin > 0.1);
  CHECK(two.lhs >= two.rhs);
}
