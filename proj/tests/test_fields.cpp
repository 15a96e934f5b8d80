#include <doctest.h>

#include <chrono>
#include <cmath>

#include "sdhom/fields.hpp"

using namespace sdhom;

namespace {

Point pt(double a) { return Point::Constant(1, a); }

Point pt(double a, double b) {
  Point p(2);
  p << a, b;
  return p;
}

MonotoneField uniform_linear(double a) {
  MonotoneField f = two_phase_field(FieldKind::linear, 1, 2.0, a, a);
  return f;
}

MonotoneField abs_subdifferential(double reach) {
  MonotoneField f;
  f.kind = FieldKind::sampled_graph_1d;
  f.dim = 1;
  f.p = 2.0;
  FieldRegion r;
  r.box = CellBox{pt(0.0), pt(1.0)};
  r.graph = {{-reach, -1.0}, {0.0, -1.0}, {0.0, 1.0}, {reach, 1.0}};
  f.regions.push_back(r);
  return f;
}

}  // namespace

TEST_CASE("potential Lagrangian values, gradients and selfduality") {
  const PotentialLagrangian L(1, 4.0, 2.0);
  // 4 a^2 / 2 + b^2 / 8
  CHECK(L.value(pt(1.0), pt(4.0)) == doctest::Approx(4.0));
  CHECK(L.value(pt(1.0), pt(0.0)) > 0.0);
  Point ga, gb;
  L.value(pt(0.5), pt(-1.0), &ga, &gb);
  CHECK(ga[0] == doctest::Approx(2.0));
  CHECK(gb[0] == doctest::Approx(-0.25));

  const PotentialLagrangian P(1, 1.0, 3.0);
  const double h = 1e-6;
  P.value(pt(0.7), pt(-0.3), &ga, &gb);
  CHECK(ga[0] == doctest::Approx((P.value(pt(0.7 + h), pt(-0.3)) - P.value(pt(0.7 - h), pt(-0.3))) / (2 * h)).epsilon(1e-6));
  CHECK(gb[0] == doctest::Approx((P.value(pt(0.7), pt(-0.3 + h)) - P.value(pt(0.7), pt(-0.3 - h))) / (2 * h)).epsilon(1e-6));

  SmallMatrix gamma(2, 2);
  gamma << 0, 1, -1, 0;
  const PotentialLagrangian S(2, 1.0, 2.0, Point::Zero(2), gamma);
  // Graph: b = a + Gamma a; zero gap on it, positive off it.
  const Point a = pt(1.0, 0.0);
  const Point b = pt(1.0, -1.0);
  CHECK(std::abs(S.value(a, b) - a.dot(b)) <= 1e-14);
  CHECK(S.value(a, pt(1.0, 1.0)) - a.dot(pt(1.0, 1.0)) > 0.1);
  // Brute-force conjugate over a dense (a,b) sample at one point.
  const Point p = pt(0.3, -0.2), q = pt(0.1, 0.4);
  double best = -kInfinity;
  for (int i = -30; i <= 30; ++i)
    for (int j = -30; j <= 30; ++j)
      for (int k = -30; k <= 30; ++k)
        for (int l = -30; l <= 30; ++l) {
          const Point aa = pt(i * 0.05, j * 0.05), bb = pt(k * 0.05, l * 0.05);
          best = std::max(best, aa.dot(p) + bb.dot(q) - S.value(aa, bb));
        }
  CHECK(std::abs(S.conjugate(p, q) - best) <= 1e-2);

  CHECK_THROWS_AS(PotentialLagrangian(2, 1.0, 2.0, Point::Zero(2), SmallMatrix::Identity(2, 2)), Error);
}

TEST_CASE("growth verification") {
  Growth good{1.0, 0.25, 0.0, 0.0, 2.0};
  const auto field = two_phase_field(FieldKind::linear, 1, 2.0, 1.0, 4.0, good);
  CHECK(verify_growth(field, 201).max_gap == 0.0);

  Growth unit{1.0, 1.0, 0.0, 0.0, 2.0};
  const auto tight = two_phase_field(FieldKind::linear, 1, 2.0, 1.0, 4.0, unit);
  try {
    verify_growth(tight, 201);
    FAIL("expected GrowthViolation");
  } catch (const GrowthViolationError& e) {
    CHECK(e.code() == ErrorCode::GrowthViolation);
    CHECK(e.region == 1);
  }

  Growth cubic{1.0, 1.0, 0.0, 0.0, 3.0};
  const auto power = two_phase_field(FieldKind::power, 1, 3.0, 1.0, 1.0, cubic);
  CHECK(verify_growth(power, 201).max_gap == 0.0);

  const auto degenerate = two_phase_field(FieldKind::linear, 1, 2.0, 1.0, 0.0, good);
  CHECK_THROWS_AS(verify_growth(degenerate, 51), GrowthViolationError);
}

TEST_CASE("Fitzpatrick function of the identity and of the absolute value") {
  const auto id = uniform_linear(1.0);
  const BoxGrid g(1, 2.0, 257);
  const auto N = fitzpatrick(id, 0, g, g);
  for (Index i = 0; i < N.size(); ++i) {
    const Point z = N.node(i);
    const double a = z[0], b = z[1];
    CHECK(std::abs(N[i] - (a + b) * (a + b) / 4) <= 1e-3);
    CHECK(N[i] >= a * b - 1e-12);
  }
  const auto abs = abs_subdifferential(2.0);
  const auto Na = fitzpatrick(abs, 0, g, g);
  for (int k = -64; k <= 64; ++k) {
    const double b = k / 64.0;
    CHECK(std::abs(Na.at(pt(0.0, b))) <= 1e-12);
  }
  CHECK(Na.at(pt(0.0, 1.5)) >= 0.9);
}

TEST_CASE("selfdualized identity, scaled identity and absolute value reproduce the graph") {
  SelfdualizeOptions opt;
  opt.radius = 2.0;
  opt.points_per_axis = 65;
  const auto start = std::chrono::steady_clock::now();
  for (double scale : {1.0, 4.0}) {
    const auto beta = uniform_linear(scale);
    const auto t = selfdualize_tables(beta, opt);
    const auto& L = t.lagrangian[0];
    CHECK(t.gaps[0].passed());
    const double hb = L.factor(1).spacing();
    for (int k = -12; k <= 12; ++k) {
      const double xi = k / 8.0;
      const auto img = graph_extract(L, pt(xi));
      CHECK(std::abs(img.center[0] - scale * xi) <= 3 * hb);
    }
  }
  const auto abs = abs_subdifferential(2.0);
  const auto t = selfdualize_tables(abs, opt);
  const auto& L = t.lagrangian[0];
  const double hb = L.factor(1).spacing();
  const auto zero = graph_extract(L, pt(0.0));
  CHECK(std::abs(zero.lo[0] + 1.0) <= 3 * hb);
  CHECK(std::abs(zero.hi[0] - 1.0) <= 3 * hb);
  const auto one = graph_extract(L, pt(1.0));
  CHECK(std::abs(one.center[0] - 1.0) <= 3 * hb);
  MESSAGE("selfdualize wall time " << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
}

TEST_CASE("selfdualized identity is close to the potential form") {
  SelfdualizeOptions opt;
  opt.points_per_axis = 65;
  const auto t = selfdualize_tables(uniform_linear(1.0), opt);
  const auto& L = t.lagrangian[0];
  double worst = 0.0;
  for (Index i = 0; i < L.size(); ++i) {
    const Point z = L.node(i);
    if (std::abs(z[0]) > 1.0 || std::abs(z[1]) > 1.0) continue;
    worst = std::max(worst, std::abs(L[i] - (z[0] * z[0] + z[1] * z[1]) / 2));
  }
  CHECK(worst <= 10 * L.max_spacing());
}

TEST_CASE("potential tables") {
  SmallMatrix gamma(2, 2);
  gamma << 0, 1, -1, 0;
  const BoxGrid A(2, 2.0, 17);
  const auto phi = TabulatedFunction::sample({A}, [](const Point& a) { return a.squaredNorm() / 2; });
  const auto L = potential_table(phi, gamma, A);
  const auto img = graph_extract(L, pt(1.0, 0.0));
  CHECK(std::abs(img.center[0] - 1.0) <= 1e-9);
  CHECK(std::abs(img.center[1] + 1.0) <= 1e-9);

  const BoxGrid A3(1, 3.0, 121);
  const auto cube = TabulatedFunction::sample({A3}, [](const Point& a) { return std::pow(std::abs(a[0]), 3) / 3; });
  const auto L3 = potential_table(cube, SmallMatrix::Zero(1, 1), BoxGrid(1, 5.0, 201));
  const auto img3 = graph_extract(L3, pt(2.0));
  CHECK(std::abs(img3.center[0] - 4.0) <= 0.05);

  SmallMatrix bad(2, 2);
  bad << 0, 1, 1, 0;
  CHECK_THROWS_AS(potential_table(phi, bad, A), Error);
}

TEST_CASE("closed-form Lagrangian from a field") {
  const auto beta = two_phase_field(FieldKind::linear, 1, 2.0, 1.0, 4.0);
  const auto L = lagrangian_from_field(beta);
  REQUIRE(L.growth());
  CHECK(L.growth()->c0 == doctest::Approx(0.125));
  CHECK(L.growth()->c1 == doctest::Approx(2.0));
  CHECK(L.value(pt(0.75), pt(1.0), pt(4.0)) == doctest::Approx(4.0));
  CHECK(L.value(pt(0.25), pt(1.0), pt(1.0)) == doctest::Approx(1.0));
  CHECK(L.value(pt(1.75), pt(1.0), pt(1.0)) == doctest::Approx(2.125));
}
