// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "sdhom/harness.hpp"

using namespace sdhom;

namespace {

using Clock = std::chrono::steady_clock;

Point pt(double a) { return Point::Constant(1, a); }

Point pt(double a, double b) {
  Point p(2);
  p << a, b;
  return p;
}

OmegaLagrangian two_phase(int dim = 1, double p = 2.0) {
  return lagrangian_from_field(two_phase_field(p == 2.0 ? FieldKind::linear : FieldKind::power, dim, p, 1.0, 4.0));
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (!o.pass) ++failures;
  std::printf("%s %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// Random convex function on a 1D grid: quadratic, kink, tilt and quartic parts.
struct RandomConvex {
  double alpha, beta, gamma, delta, c;
  double operator()(double x) const {
    return alpha * x * x / 2 + beta * std::abs(x - c) + gamma * x + delta * x * x * x * x / 4;
  }
  double max_slope(double r) const { return alpha * r + beta + std::abs(gamma) + delta * r * r * r; }
};

RandomConvex random_convex(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return {0.5 + 1.5 * u(rng), u(rng), 2 * u(rng) - 1, 0.5 * u(rng), 2 * u(rng) - 1};
}

}  // namespace

int main() {
  // Shared two-phase quadratic table at 129^2 (a,b) nodes.
  const auto L1 = two_phase();
  const CellGrid cell64(1, 64);
  const BoxGrid box129(1, 2.0, 129);
  std::optional<HomLagrangian> hom129;
  auto quadratic_table = [&]() -> const HomLagrangian& {
    if (!hom129) hom129 = tabulate_hom(L1, box129, box129, cell64);
    return *hom129;
  };

  criterion(1, "harmonic-mean oracle", [&] {
    const auto start = Clock::now();
    const BoxGrid box(1, 2.0, 65);
    const auto hom = tabulate_hom(L1, box, box, CellGrid(1, 256));
    const double slope = beta_hom_extract(hom.table).slope();
    const double secs = seconds_since(start);
    const double tol = 1e-3;
    return Outcome{std::abs(slope - 1.6) <= tol && secs <= 10.0,
                   fmt("beta_hom slope %.6f vs 1.6 (tol %.0e), %.1f s of 10 s", slope, tol, secs)};
  });

  criterion(2, "p-harmonic oracle", [&] {
    const auto start = Clock::now();
    const double exact = 16.0 / 9.0, tol = 1e-2;
    const CellGrid grid(1, 256);
    CellOptions opt;
    opt.p = 3.0;
    // Route through the potential cell problem: psi_hom(a) = beta(1) |a|^3 / 3.
    const auto field = two_phase_field(FieldKind::power, 1, 3.0, 1.0, 4.0);
    const double psi = psi_hom(OmegaPotential::from_field(field), pt(1.0), grid, opt).value;
    const double route_potential = 3.0 * psi;
    // Route through the tabulated L_hom and its extracted graph.
    const BoxGrid box(1, 2.5, 81);
    TabulateOptions topt;
    topt.cell = opt;
    const auto hom = tabulate_hom(two_phase(1, 3.0), box, box, CellGrid(1, 64), topt);
    const double route_table = graph_extract(hom.table, pt(1.0)).center[0];
    const double secs = seconds_since(start);
    const bool ok = std::abs(route_potential - exact) <= tol && std::abs(route_table - exact) <= tol &&
                    std::abs(route_potential - route_table) <= tol && secs <= 60.0;
    return Outcome{ok, fmt("potential route %.5f, table route %.5f, exact %.5f (tol 1e-2), %.1f s", route_potential,
                           route_table, exact, secs)};
  });

  criterion(3, "selfduality of L_hom", [&] {
    const auto& hom = quadratic_table();
    const double C = 0.1;
    const double h = hom.table.max_spacing() + cell64.spacing();
    const double tol = 1e-6 + C * h;
    // Independent conjugate of the table, compared on interior nodes.
    const auto& a = hom.table.factor(0);
    const BoxGrid out(1, 4.0, 257);
    const auto conj = conjugate(hom.table, {out, out});
    double worst = 0.0;
    Index checked = 0;
    for (Index i = 0; i < hom.table.size(); ++i) {
      const Point z = hom.table.node(i);
      if (std::abs(z[0]) > 0.5 * a.radius || std::abs(z[1]) > 0.5 * a.radius) continue;
      const double star = conj.table.at(pt(z[1], z[0]));
      worst = std::max(worst, std::abs(star - hom.table[i]));
      ++checked;
    }
    const bool ok = hom.selfdual.max_gap <= tol && worst <= tol && checked > 0;
    return Outcome{ok, fmt("selfdual_gap_check %.3e, independent transform %.3e, tol %.3e on %.0f nodes",
                           hom.selfdual.max_gap, worst, tol, static_cast<double>(checked))};
  });

  criterion(4, "dual cell formula", [&] {
    const auto& hom = quadratic_table();
    DualCheckOptions opt;
    opt.tol = 1e-3;
    const auto r = dual_cell_check(L1, hom, opt);
    return Outcome{r.passed() && r.nodes_compared > 0,
                   fmt("max route discrepancy %.3e over %.0f nodes (tol 1e-3), coverage %.2f", r.max_discrepancy,
                       static_cast<double>(r.nodes_compared), r.coverage)};
  });

  criterion(5, "homogenized bounds", [&] {
    Index violations = 0, checked = 0;
    const auto& q = quadratic_table();
    violations += q.bounds.violations;
    checked += q.bounds.nodes_checked;
    CellOptions opt3;
    opt3.p = 3.0;
    TabulateOptions t3;
    t3.cell = opt3;
    const BoxGrid box3(1, 2.0, 33);
    const auto h3 = tabulate_hom(two_phase(1, 3.0), box3, box3, CellGrid(1, 64), t3);
    violations += h3.bounds.violations;
    checked += h3.bounds.nodes_checked;
    const BoxGrid box2(2, 1.0, 7);
    const auto h2 = tabulate_hom(two_phase(2), box2, box2, CellGrid(2, 16));
    violations += h2.bounds.violations;
    checked += h2.bounds.nodes_checked;
    return Outcome{violations == 0 && checked > 0,
                   fmt("%.0f violations over %.0f checked nodes (1D p=2, 1D p=3, 2D laminate)",
                       static_cast<double>(violations), static_cast<double>(checked))};
  });

  criterion(6, "subdifferential averaging", [&] {
    const auto& hom = quadratic_table();
    const TabulatedFunction& t = hom.table;
    const CellProblem problem(L1, hom.cell);
    std::mt19937 rng(6);
    std::uniform_int_distribution<int> k(2, t.axis_points(0) - 3);
    double worst = 0.0;
    for (int c = 0; c < 20; ++c) {
      const Index node = k(rng) * t.stride(0) + k(rng) * t.stride(1);
      const Point z = t.node(node);
      const auto avg = subdiff_average(problem, problem.solve(z.head(1), z.tail(1)));
      for (int ax = 0; ax < 2; ++ax) {
        const double fd = (t[node + t.stride(ax)] - t[node - t.stride(ax)]) / (2.0 * t.axis_spacing(ax));
        worst = std::max(worst, std::abs(fd - (ax == 0 ? avg.da[0] : avg.db[0])));
      }
    }
    return Outcome{worst <= 1e-3, fmt("max |average - central difference| %.3e at 20 nodes (tol 1e-3)", worst)};
  });

  criterion(7, "zero-infimum certificate", [&] {
    const auto unit = lagrangian_from_field(two_phase_field(FieldKind::linear, 1, 2.0, 1.0, 1.0));
    const DirichletMesh mesh(1, 255);
    const auto r = solve_dirichlet(unit, mesh, Eigen::VectorXd::Ones(255));
    const auto x = mesh.nodes();
    double err = 0.0;
    for (Index i = 0; i < 255; ++i) err = std::max(err, std::abs(r.u[i] - x(0, i) * (1 - x(0, i)) / 2));
    double lo = r.gap, hi = r.gap;
    bool in_range = r.gap >= -1e-10 && r.gap <= 1e-6;
    for (double eps : {0.25, 1.0 / 16, 1.0 / 64}) {
      DirichletOptions opt;
      opt.eps = eps;
      const auto s = solve_dirichlet(L1, DirichletMesh(1, 1023), Eigen::VectorXd::Ones(1023), opt);
      lo = std::min(lo, s.gap);
      hi = std::max(hi, s.gap);
      in_range = in_range && s.gap >= -1e-10 && s.gap <= opt.tolerance();
    }
    DirichletOptions p3;
    p3.p = 3.0;
    p3.eps = 0.25;
    const auto s3 = solve_dirichlet(two_phase(1, 3.0), DirichletMesh(1, 127), Eigen::VectorXd::Ones(127), p3);
    in_range = in_range && s3.gap >= -1e-10 && s3.gap <= p3.tolerance();
    lo = std::min(lo, s3.gap);
    hi = std::max(hi, s3.gap);
    return Outcome{in_range && err <= 1e-6,
                   fmt("gaps in [%.2e, %.2e], |u - x(1-x)/2| %.2e (tol 1e-6)", lo, hi, err)};
  });

  criterion(8, "homogenization sweep", [&] {
    const auto start = Clock::now();
    const BoxGrid box(1, 2.0, 65);
    const auto hom = tabulate_hom(L1, box, box, cell64);
    const auto r = eps_sweep(L1, hom, Source::parse("const:1"), EpsSchedule{});
    const double secs = seconds_since(start);
    const bool ok = r.rate_u >= 0.9 && r.rate_flux >= 0.9 && std::abs(r.u_hom_max - 0.078125) <= 1e-4 &&
                    r.all_certified && secs <= 300.0;
    return Outcome{ok, fmt("rate_u %.3f, rate_flux %.3f, u_hom max %.6f, %.1f s", r.rate_u, r.rate_flux,
                           r.u_hom_max, secs)};
  });

  criterion(9, "graph projection bounds", [&] {
    const PotentialLagrangian q(1, 1.0, 2.0);
    const auto p0 = brl_project(q, pt(1.0), pt(0.0));
    const double off0 = std::max(std::abs(p0.u[0] - 0.5), std::abs(p0.u_star[0] - 0.5));
    const DirichletMesh mesh(1, 63);
    DirichletOptions opt;
    opt.eps = 0.125;
    const DirichletProblem problem(L1, mesh, opt);
    std::mt19937 rng(9);
    std::normal_distribution<double> n01;
    double excess_u = -kInfinity, excess_s = -kInfinity, excess_v = -kInfinity;
    for (int t = 0; t < 20; ++t) {
      Eigen::VectorXd src(63), du(63), ds(63);
      const double c = n01(rng);
      for (Index i = 0; i < 63; ++i) {
        src[i] = c + std::sin(0.2 * (t + 1) * static_cast<double>(i));
        du[i] = 0.02 * n01(rng);
        ds[i] = 0.3 * n01(rng);
      }
      const auto sol = problem.solve(src);
      const auto r = brl_project(problem, sol.u + du, src + ds);
      excess_u = std::max(excess_u, r.distance_u - std::sqrt(r.eps));
      excess_s = std::max(excess_s, r.distance_u_star - std::sqrt(r.eps));
      excess_v = std::max(excess_v, r.value_change - r.value_bound);
    }
    const bool ok = off0 <= 1e-12 && excess_u <= 1e-8 && excess_s <= 1e-8 && excess_v <= 1e-8;
    return Outcome{ok, fmt("0D offset %.1e; max excess over sqrt(eps): u %.2e, u* %.2e; value %.2e", off0, excess_u,
                           excess_s, excess_v)};
  });

  criterion(10, "graph convergence", [&] {
    const BoxGrid box(1, 2.0, 65);
    const auto hom = tabulate_hom(L1, box, box, cell64);
    const auto r = graph_convergence_check(L1, hom, EpsSchedule{});
    const bool ok = r.rate >= 0.45 && r.monotone_checks == 100 && r.monotone_violations == 0;
    return Outcome{ok, fmt("distance rate %.3f (>= 0.45), %.0f monotone checks, %.0f violations", r.rate,
                           r.monotone_checks, r.monotone_violations)};
  });

  criterion(11, "Fitzpatrick reconstruction", [&] {
    SelfdualizeOptions opt;
    opt.radius = 2.0;
    opt.points_per_axis = 65;
    MonotoneField abs;
    abs.kind = FieldKind::sampled_graph_1d;
    FieldRegion reg;
    reg.box = CellBox{pt(0.0), pt(1.0)};
    reg.graph = {{-2.0, -1.0}, {0.0, -1.0}, {0.0, 1.0}, {2.0, 1.0}};
    abs.regions.push_back(reg);
    const std::vector<std::pair<MonotoneField, std::function<std::pair<double, double>(double)>>> cases{
        {two_phase_field(FieldKind::linear, 1, 2.0, 1.0, 1.0), [](double x) { return std::pair{x, x}; }},
        {two_phase_field(FieldKind::linear, 1, 2.0, 4.0, 4.0), [](double x) { return std::pair{4 * x, 4 * x}; }},
        {abs, [](double x) {
           return x < 0 ? std::pair{-1.0, -1.0} : x > 0 ? std::pair{1.0, 1.0} : std::pair{-1.0, 1.0};
         }}};
    double graph_err = 0.0, n_margin = kInfinity, sandwich = kInfinity;
    int graph_ok = 0, graph_total = 0;
    for (const auto& [beta, image] : cases) {
      const auto t = selfdualize_tables(beta, opt);
      const auto& L = t.lagrangian[0];
      const auto& N = t.fitzpatrick[0];
      const auto& Ns = t.fitzpatrick_dual[0];
      const double hb = L.factor(1).spacing();
      for (int k = -8; k <= 8; ++k) {
        const double xi = k / 8.0;
        const auto img = graph_extract(L, pt(xi));
        const auto [lo, hi] = image(xi);
        const double e = std::max(std::abs(img.lo[0] - lo), std::abs(img.hi[0] - hi));
        const double c = std::abs(img.center[0] - 0.5 * (lo + hi));
        const double err = lo == hi ? c : e;
        graph_err = std::max(graph_err, err / hb);
        ++graph_total;
        if (err <= 3 * hb) ++graph_ok;
      }
      for (Index i = 0; i < N.size(); ++i) {
        const Point z = N.node(i);
        if (is_finite(N[i])) n_margin = std::min(n_margin, N[i] - z[0] * z[1]);
        if (std::abs(z[0]) > 1.0 || std::abs(z[1]) > 1.0) continue;
        const double upper = Ns.at(pt(z[1], z[0]));
        const double l = L.at(z);
        if (!is_finite(l) || !is_finite(upper)) continue;
        sandwich = std::min({sandwich, l - N[i], upper - l});
      }
    }
    const double tol = 1e-9;
    const bool ok = graph_ok == graph_total && n_margin >= -tol && sandwich >= -tol;
    return Outcome{ok, fmt("graph error %.2f grid widths (max 3), min N - <a,b> %.2e, min sandwich slack %.2e",
                           graph_err, n_margin, sandwich)};
  });

  criterion(12, "two-scale averaging tests", [&] {
    const auto rl = riemann_lebesgue_test([](double y) { return y < 0.5 ? 1.0 : 0.0; }, [](double x) { return x; },
                                          {4, 8, 16, 32, 64});
    const PotentialLagrangian q(1, 1.0, 2.0);
    const auto single = jensen_bound_test(q, {{1.0, 0.8, 0.0}});
    const auto two = jensen_bound_test(q, {{0.5, 0.8, -0.6}, {0.5, -0.3, 0.9}});
    const bool ok = std::abs(rl.rate - 1.0) <= 0.05 && std::abs(single.margin) <= 1e-9 && two.margin >= 0.0;
    return Outcome{ok, fmt("indicator deviation rate %.4f, singleton margin %.1e, two-piece margin %.3f", rl.rate,
                           single.margin, two.margin)};
  });

  criterion(13, "property suites", [&] {
    const int cases = 200;
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const BoxGrid xg(1, 2.0, 81);
    const double hx = xg.spacing();
    int involution = 0, order = 0, fenchel = 0, moreau = 0, monotone = 0, covariance = 0;
    for (int c = 0; c < cases; ++c) {
      const auto f = random_convex(rng);
      const auto tf = TabulatedFunction::sample({xg}, [&](const Point& x) { return f(x[0]); });
      const double R = std::ceil(f.max_slope(2.0)) + 1.0;
      const BoxGrid yg(1, R, 2 * static_cast<int>(R / 0.05) + 1);
      const auto star = conjugate(tf, {yg});
      const auto back = conjugate(star.table, {xg});
      double inv = 0.0;
      for (Index i = 0; i < tf.size(); ++i)
        if (!back.boundary_argmax[static_cast<std::size_t>(i)]) inv = std::max(inv, std::abs(back.table[i] - tf[i]));
      if (inv > hx * yg.spacing()) ++involution;

      // g = f + r with r >= 0 gives g* <= f* on every node.
      const auto tg = TabulatedFunction::sample({xg}, [&](const Point& x) { return f(x[0]) + 0.5 * (1 + u(rng)); });
      const auto gstar = conjugate(tg, {yg});
      for (Index j = 0; j < yg.node_count(); ++j)
        if (gstar.table[j] > star.table[j] + 1e-12) {
          ++order;
          break;
        }

      for (int s = 0; s < 5; ++s) {
        const Index i = std::uniform_int_distribution<Index>(0, tf.size() - 1)(rng);
        const Index j = std::uniform_int_distribution<Index>(0, star.table.size() - 1)(rng);
        if (tf[i] + star.table[j] < tf.node(i)[0] * star.table.node(j)[0] - 1e-12) {
          ++fenchel;
          break;
        }
      }

      const double x = u(rng);
      const double sum = prox(tf, pt(x), 1.0)[0] + prox(star.table, pt(x), 1.0)[0];
      if (std::abs(sum - x) > std::max(hx, yg.spacing())) ++moreau;

      // Potential-form Lagrangian phi(a) + phi*(b): extracted graph pairs are monotone.
      const BoxGrid ag(1, 1.5, 61), bg(1, std::ceil(f.max_slope(1.5)) + 1.0, 121);
      const auto phi = TabulatedFunction::sample({ag}, [&](const Point& a) { return f(a[0]); });
      const auto L = potential_table(phi, SmallMatrix::Zero(1, 1), bg);
      std::uniform_int_distribution<int> node(5, 55);
      const double a1 = ag.coordinate(node(rng)), a2 = ag.coordinate(node(rng));
      GraphOptions gopt;
      gopt.tol = bg.spacing();
      const double b1 = graph_extract(L, pt(a1), gopt).center[0], b2 = graph_extract(L, pt(a2), gopt).center[0];
      if ((a1 - a2) * (b1 - b2) < -ag.spacing() * bg.spacing()) ++monotone;
    }

    // Solver translation covariance.
    const DirichletMesh mesh(1, 31);
    for (int c = 0; c < cases; ++c) {
      DirichletOptions opt;
      opt.eps = c % 2 ? 0.25 : 0.125;
      const DirichletProblem base(L1, mesh, opt);
      Eigen::VectorXd src(31);
      const double a = u(rng), b = u(rng), w = 1.0 + 3.0 * std::abs(u(rng));
      for (Index i = 0; i < 31; ++i) src[i] = a + b * std::sin(w * static_cast<double>(i) / 31.0);
      const auto f0 = particular_flux(base.operators(), src);
      const DirichletProblem shifted(base.sampled().shifted(f0.f), mesh, opt);
      const auto r1 = base.solve(src);
      const auto r2 = shifted.solve(Eigen::VectorXd::Zero(31));
      if ((r1.u - r2.u).cwiseAbs().maxCoeff() > 1e-8 || std::abs(r1.gap - r2.gap) > 1e-9) ++covariance;
    }
    const int total = involution + order + fenchel + moreau + monotone + covariance;
    std::ostringstream os;
    os << "failures out of " << cases << " each: involution " << involution << ", order " << order << ", Fenchel-Young "
       << fenchel << ", Moreau " << moreau << ", monotone graphs " << monotone << ", translation " << covariance;
    return Outcome{total == 0, os.str()};
  });

  std::printf("%s: %d of 13 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
