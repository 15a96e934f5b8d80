#include "sdhom/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "sdhom/parallel.hpp"

namespace sdhom {

namespace {

double smoothstep(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * (3.0 - 2.0 * t);
}

double lp_norm(const Eigen::VectorXd& v, double p, double weight) {
  if (p == 2.0) return std::sqrt(weight * v.squaredNorm());
  return std::pow(weight * v.array().abs().pow(p).sum(), 1.0 / p);
}

double golden_section(const std::function<double(double)>& f, double lo, double hi) {
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - ratio * (b - a), d = a + ratio * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && b - a > 1e-13 * std::max(1.0, std::abs(a) + std::abs(b)); ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = f(d);
    }
  }
  return std::min(fc, fd);
}

// Grid coordinates (i, j) of interior node n, 1-based.
std::pair<Index, Index> node_ij(const DirichletMesh& mesh, Index n) {
  if (mesh.dim == 1) return {n + 1, 0};
  return {n / mesh.interior + 1, n % mesh.interior + 1};
}

}  // namespace

Source Source::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw Error(ErrorCode::InvalidParameter, "source must look like kind:value, got " + text);
  const std::string kind = text.substr(0, colon);
  Source s;
  if (kind == "const") {
    s.kind = Kind::constant;
  } else if (kind == "sin") {
    s.kind = Kind::sine;
  } else {
    throw Error(ErrorCode::InvalidParameter, "unknown source kind " + kind);
  }
  try {
    std::size_t used = 0;
    s.scale = std::stod(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidParameter, "source scale is not a number in " + text);
  }
  return s;
}

std::string Source::str() const {
  std::ostringstream os;
  os << (kind == Kind::constant ? "const:" : "sin:") << scale;
  return os.str();
}

Eigen::VectorXd Source::evaluate(const DirichletMesh& mesh) const {
  const Eigen::MatrixXd x = mesh.nodes();
  Eigen::VectorXd v(x.cols());
  for (Index n = 0; n < x.cols(); ++n) {
    double s = scale;
    if (kind == Kind::sine)
      for (Index k = 0; k < x.rows(); ++k) s *= std::sin(std::numbers::pi * x(k, n));
    v[n] = s;
  }
  return v;
}

void EpsSchedule::validate() const {
  if (inverse_eps.empty()) throw Error(ErrorCode::InvalidParameter, "empty eps schedule");
  for (std::size_t i = 0; i < inverse_eps.size(); ++i) {
    const int n = inverse_eps[i];
    if (n != 4 && n != 8 && n != 16 && n != 32 && n != 64)
      throw Error(ErrorCode::InvalidParameter, "1/eps must be one of 4, 8, 16, 32, 64");
    if (i > 0 && n <= inverse_eps[i - 1]) throw Error(ErrorCode::InvalidParameter, "eps must decrease");
    if (elements % n != 0 || elements / n < 8)
      throw Error(ErrorCode::InvalidParameter, "the mesh must hold at least 8 cells per period");
  }
}

double fit_rate(const std::vector<double>& eps, const std::vector<double>& values, int tail) {
  const std::size_t n = std::min(eps.size(), values.size());
  const std::size_t first = tail > 0 && n > static_cast<std::size_t>(tail) ? n - static_cast<std::size_t>(tail) : 0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int count = 0, zeros = 0;
  for (std::size_t i = first; i < n; ++i) {
    if (!(values[i] > 0.0)) {
      ++zeros;
      continue;
    }
    const double x = std::log(eps[i]), y = std::log(values[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++count;
  }
  // Identically vanishing errors converge at any rate.
  if (count < 2) return zeros > 0 ? kInfinity : 0.0;
  const double denom = count * sxx - sx * sx;
  return denom > 0.0 ? (count * sxy - sx * sy) / denom : 0.0;
}

double TTopologyMeter::weak_max() const {
  return weak.empty() ? 0.0 : *std::max_element(weak.begin(), weak.end());
}

std::vector<Eigen::MatrixXd> flux_dictionary(const DirichletMesh& mesh) {
  const Eigen::MatrixXd x = mesh.centroids();
  const double pi = std::numbers::pi;
  std::vector<std::function<Eigen::Vector2d(double, double)>> fields;
  if (mesh.dim == 1) {
    for (auto f : std::vector<std::function<double(double)>>{
             [](double) { return 1.0; }, [](double t) { return t; }, [](double t) { return t * t; },
             [](double t) { return t * (1.0 - t); }, [pi](double t) { return std::sin(pi * t); },
             [pi](double t) { return std::cos(pi * t); }, [pi](double t) { return std::sin(2 * pi * t); },
             [pi](double t) { return std::cos(2 * pi * t); }})
      fields.push_back([f](double s, double) { return Eigen::Vector2d(f(s), 0.0); });
  } else {
    fields = {[](double, double) { return Eigen::Vector2d(1, 0); },
              [](double, double) { return Eigen::Vector2d(0, 1); },
              [](double s, double) { return Eigen::Vector2d(s, 0); },
              [](double, double t) { return Eigen::Vector2d(0, t); },
              [](double s, double t) { return Eigen::Vector2d(s * t, 0); },
              [](double s, double) { return Eigen::Vector2d(0, s * s); },
              [pi](double, double t) { return Eigen::Vector2d(std::sin(pi * t), 0); },
              [pi](double s, double) { return Eigen::Vector2d(0, std::cos(pi * s)); }};
  }
  std::vector<Eigen::MatrixXd> out;
  for (const auto& f : fields) {
    Eigen::MatrixXd w(mesh.dim, x.cols());
    for (Index e = 0; e < x.cols(); ++e) {
      const Eigen::Vector2d v = f(x(0, e), mesh.dim > 1 ? x(1, e) : 0.0);
      w.col(e) = v.head(mesh.dim);
    }
    out.push_back(std::move(w));
  }
  return out;
}

TTopologyMeter measure_flux(const DirichletOperators& ops, const Eigen::MatrixXd& tau, const Eigen::MatrixXd& limit) {
  TTopologyMeter m;
  const Eigen::MatrixXd diff = tau - limit;
  for (const auto& w : flux_dictionary(ops.mesh())) m.weak.push_back(std::abs(ops.inner_elements(diff, w)));
  const Eigen::MatrixXd g = ops.gradient(ops.poisson(ops.neg_divergence(diff)));
  m.strong = std::sqrt(ops.inner_elements(g, g));
  return m;
}

OmegaLagrangian hom_field(const HomLagrangian& hom) {
  return OmegaLagrangian::uniform(std::make_shared<TableLagrangian>(hom.table.with_rule(Interpolation::cubic)),
                                  hom.growth);
}

SweepReport eps_sweep(const OmegaLagrangian& L, const HomLagrangian& hom, const Source& source,
                      const EpsSchedule& schedule, const SweepOptions& options) {
  schedule.validate();
  const DirichletMesh mesh = schedule.mesh();
  const DirichletOperators ops(mesh);
  const Eigen::VectorXd u_star = source.evaluate(mesh);
  SweepReport report;
  DirichletOptions hom_opt = options.solve;
  hom_opt.eps = 1.0;
  report.hom = DirichletProblem(hom_field(hom), mesh, hom_opt).solve(u_star);
  report.u_hom_max = report.hom.u.maxCoeff();

  report.records.resize(schedule.inverse_eps.size());
  parallel_for(static_cast<Index>(report.records.size()), options.threads, [&](Index i) {
    SweepRecord& r = report.records[static_cast<std::size_t>(i)];
    r.eps = schedule.eps(static_cast<std::size_t>(i));
    DirichletOptions opt = options.solve;
    opt.eps = r.eps;
    try {
      r.solution = DirichletProblem(L, mesh, opt).solve(u_star);
    } catch (const SolverStalledError& e) {
      r.error = e.what();
      return;
    }
    r.ok = true;
    r.gap = r.solution.gap;
    r.err_u = lp_norm(r.solution.u - report.hom.u, options.p, mesh.node_weight());
    r.flux = measure_flux(ops, r.solution.flux.f, report.hom.flux.f);
    r.div_residual = (ops.neg_divergence(r.solution.flux.f) - u_star).cwiseAbs().maxCoeff();
  });

  std::vector<double> eps, err, flux;
  report.all_certified = true;
  for (auto& r : report.records) {
    report.all_certified = report.all_certified && r.ok && r.gap <= options.solve.tolerance();
    if (!r.ok) continue;
    eps.push_back(r.eps);
    err.push_back(r.err_u);
    flux.push_back(r.flux.weak_max());
    r.rate_running = eps.size() >= 2 ? fit_rate(eps, err) : 0.0;
  }
  report.rate_u = fit_rate(eps, err);
  report.rate_flux = fit_rate(eps, flux);
  return report;
}

CorrectorBank CorrectorBank::build(const OmegaLagrangian& L, const SolverReport& hom_solution,
                                   const DirichletMesh& mesh, double eps, const CellOptions& options) {
  const double cells = (mesh.interior + 1) * eps;
  const int n_c = static_cast<int>(std::lround(cells));
  if (std::abs(cells - n_c) > 1e-9 || n_c < 8)
    throw Error(ErrorCode::InvalidParameter, "eps must divide the mesh into at least 8 cells per period");
  if (hom_solution.gradient.cols() != mesh.element_count())
    throw Error(ErrorCode::GridMismatch, "homogenized solution does not live on this mesh");
  CorrectorBank bank;
  bank.eps_ = eps;
  bank.mesh_ = mesh;
  bank.cell_ = CellGrid(mesh.dim, n_c);
  const CellProblem problem(L, bank.cell_, options);
  const Index E = mesh.element_count();
  bank.solutions_.reserve(static_cast<std::size_t>(E));
  for (Index e = 0; e < E; ++e) {
    const CellSolution* warm = e > 0 ? &bank.solutions_.back() : nullptr;
    bank.solutions_.push_back(problem.solve(hom_solution.gradient.col(e), hom_solution.flux.f.col(e), warm));
  }
  return bank;
}

RecoveryResult recovery_sequence(const SolverReport& hom_solution, const OmegaLagrangian& hom_L,
                                 const OmegaLagrangian& L, const CorrectorBank& bank) {
  const DirichletMesh& mesh = bank.mesh();
  if (bank.solutions().empty() || hom_solution.u.size() != mesh.node_count())
    throw Error(ErrorCode::PrecomputeRequired, "recovery needs a corrector bank built for this solution and mesh");
  const DirichletOperators ops(mesh);
  const double eps = bank.eps();
  const int n_c = bank.cell().nodes_per_axis;
  const Index cells = mesh.interior + 1;
  const double delta = 4.0 * eps;
  const Eigen::MatrixXd x = mesh.nodes();

  RecoveryResult out;
  out.u = hom_solution.u;
  for (Index n = 0; n < mesh.node_count(); ++n) {
    const auto [i, j] = node_ij(mesh, n);
    // The element whose lower-left corner is this node supplies the corrector.
    const Index e = mesh.dim == 1 ? i : 2 * (i * cells + j);
    const Index k = mesh.dim == 1 ? i % n_c : (i % n_c) * n_c + (j % n_c);
    double psi = 1.0;
    for (Index a = 0; a < x.rows(); ++a) psi *= smoothstep(std::min(x(a, n), 1.0 - x(a, n)) / delta);
    out.u[n] += eps * psi * bank.solutions()[static_cast<std::size_t>(e)].corrector.phi[k];
  }

  out.tau = hom_solution.flux.f;
  if (mesh.dim > 1) {
    for (Index e = 0; e < mesh.element_count(); ++e) {
      const Index cell = e / 2, i = cell / cells, j = cell % cells;
      const Index k = (i % n_c) * n_c + (j % n_c);
      out.tau.col(e) += bank.solutions()[static_cast<std::size_t>(e)].corrector.g.col(k);
    }
    // Restore -div tau = u* exactly.
    const FluxField f0 = particular_flux(ops, hom_solution.flux.divergence);
    Eigen::MatrixXd free = out.tau - f0.f;
    ops.project_kernel(free);
    out.tau = f0.f + free;
  }
  const double w = mesh.element_weight();
  const auto S = SampledLagrangian::sample(L, mesh.centroids() / eps);
  out.value = w * S.total(ops.gradient(out.u), out.tau);
  const auto H = SampledLagrangian::sample(hom_L, mesh.centroids());
  out.hom_value = w * H.total(hom_solution.gradient, hom_solution.flux.f);
  out.margin = out.value - out.hom_value;
  return out;
}

double affine_recovery_value(const OmegaLagrangian& L, const Point& xi, const Point& eta, double eps, int elements,
                             const CellOptions& options) {
  const int n_c = static_cast<int>(std::lround(elements * eps));
  if (std::abs(elements * eps - n_c) > 1e-9 || n_c < 8)
    throw Error(ErrorCode::InvalidParameter, "eps must divide the torus into at least 8 cells per period");
  const int d = L.dim();
  const CellGrid cell(d, n_c), fine(d, elements);
  const CellSolution s = CellProblem(L, cell, options).solve(xi, eta);
  const Index K = fine.size();
  Eigen::VectorXd u(K);
  Eigen::MatrixXd g(d, K);
  for (Index n = 0; n < K; ++n) {
    const Index k = d == 1 ? n % n_c : ((n / elements) % n_c) * n_c + (n % elements) % n_c;
    u[n] = eps * s.corrector.phi[k];
    g.col(n) = s.corrector.g.col(k);
  }
  const PeriodicCalculus calc(fine);
  const Eigen::MatrixXd A = calc.gradient(u).colwise() + Eigen::VectorXd(xi);
  const Eigen::MatrixXd F = g.colwise() + Eigen::VectorXd(eta);
  const auto S = SampledLagrangian::sample(L, fine.centers() / eps);
  return S.total(A, F) / static_cast<double>(K);
}

LiminfMargins liminf_check(const OmegaLagrangian& L, const OmegaLagrangian& hom_L, const DirichletMesh& mesh,
                           const std::vector<LiminfEntry>& sequence, const Eigen::VectorXd& u,
                           const Eigen::MatrixXd& tau, const Eigen::MatrixXd* f) {
  const DirichletOperators ops(mesh);
  const double w = mesh.element_weight();
  const Eigen::MatrixXd shift = f ? *f : Eigen::MatrixXd::Zero(mesh.dim, mesh.element_count());
  LiminfMargins out;
  out.hom_value = w * SampledLagrangian::sample(hom_L, mesh.centroids()).total(ops.gradient(u), tau + shift);
  for (const auto& entry : sequence) {
    const auto S = SampledLagrangian::sample(L, mesh.centroids() / entry.eps);
    const double value = w * S.total(ops.gradient(entry.u), entry.tau + shift);
    out.eps.push_back(entry.eps);
    out.value.push_back(value);
    out.margin.push_back(value - out.hom_value);
  }
  return out;
}

GraphConvergenceReport graph_convergence_check(const OmegaLagrangian& L, const HomLagrangian& hom,
                                               const EpsSchedule& schedule, const GraphConvergenceOptions& options) {
  schedule.validate();
  const DirichletMesh mesh = schedule.mesh();
  const DirichletOperators ops(mesh);
  const OmegaLagrangian H = hom_field(hom);
  DirichletOptions hom_opt = options.solve;
  hom_opt.eps = 1.0;
  const DirichletProblem hom_problem(H, mesh, hom_opt);

  const std::size_t ns = options.sources.size();
  const std::size_t levels = schedule.inverse_eps.size();
  std::vector<SolverReport> hom_solutions;
  std::vector<Eigen::VectorXd> sources;
  for (const auto& text : options.sources) {
    sources.push_back(Source::parse(text).evaluate(mesh));
    hom_solutions.push_back(hom_problem.solve(sources.back()));
  }

  GraphConvergenceReport report;
  // points[level][source]: level 0 is the homogenized graph.
  std::vector<std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>> points(levels + 1);
  for (std::size_t s = 0; s < ns; ++s) points[0].emplace_back(hom_solutions[s].u, sources[s]);

  for (std::size_t l = 0; l < levels; ++l) {
    const double eps = schedule.eps(l);
    DirichletOptions opt = options.solve;
    opt.eps = eps;
    const DirichletProblem problem(L, mesh, opt);
    double gap = 0.0, distance = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
      const CorrectorBank bank = CorrectorBank::build(L, hom_solutions[s], mesh, eps, options.cell);
      const RecoveryResult rec = recovery_sequence(hom_solutions[s], H, L, bank);
      const BrlProjection proj = brl_project(problem, rec.u, sources[s]);
      gap = std::max(gap, proj.eps);
      report.bound_excess = std::max(report.bound_excess, proj.distance_u - std::sqrt(proj.eps));
      const double d_u = lp_norm(proj.u - hom_solutions[s].u, 2.0, mesh.node_weight());
      distance = std::max(distance, d_u + proj.distance_u_star);
      points[l + 1].emplace_back(proj.u, proj.u_star);
    }
    report.eps.push_back(eps);
    report.gap.push_back(gap);
    report.distance.push_back(distance);
  }
  report.rate = fit_rate(report.eps, report.distance);

  std::mt19937 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick_level(0, levels), pick_source(0, ns - 1);
  for (int t = 0; t < options.monotone_pairs && ns >= 2; ++t) {
    const auto& level = points[pick_level(rng)];
    const std::size_t i = pick_source(rng);
    std::size_t j = pick_source(rng);
    while (j == i) j = pick_source(rng);
    const double pairing = ops.inner_nodes(level[i].first - level[j].first, level[i].second - level[j].second);
    const double scale = ops.inner_nodes(level[i].first, level[i].second) + ops.inner_nodes(level[j].first, level[j].second);
    ++report.monotone_checks;
    if (pairing < -1e-8 * std::max(1.0, std::abs(scale))) ++report.monotone_violations;
  }
  return report;
}

DeviationTable riemann_lebesgue_test(const std::function<double(double)>& f, const std::function<double(double)>& phi,
                                     const std::vector<int>& inverse_eps, int points_per_period) {
  if (points_per_period < 1) throw Error(ErrorCode::InvalidParameter, "need at least one point per period");
  double mean = 0.0;
  for (int k = 0; k < points_per_period; ++k) mean += f((k + 0.5) / points_per_period);
  mean /= points_per_period;
  DeviationTable table;
  for (int n : inverse_eps) {
    const Index N = Index{n} * points_per_period;
    double oscillating = 0.0, plain = 0.0;
    for (Index j = 0; j < N; ++j) {
      const double x = (static_cast<double>(j) + 0.5) / static_cast<double>(N);
      const double y = (static_cast<double>(j % points_per_period) + 0.5) / points_per_period;
      oscillating += f(y) * phi(x);
      plain += phi(x);
    }
    table.eps.push_back(1.0 / n);
    table.deviation.push_back(std::abs(oscillating - mean * plain) / static_cast<double>(N));
  }
  table.rate = fit_rate(table.eps, table.deviation, 0);
  return table;
}

JensenResult jensen_bound_test(const RegionLagrangian& L, const std::vector<JensenPiece>& pieces,
                               double search_radius) {
  if (L.dim() != 1) throw Error(ErrorCode::InvalidParameter, "the Jensen test works on one-dimensional data");
  auto value = [&](double a, double b) { return L.value(Point::Constant(1, a), Point::Constant(1, b)); };
  JensenResult r;
  r.lhs = golden_section(
      [&](double f) {
        double s = 0.0;
        for (const auto& p : pieces) s += p.measure * value(p.a, p.b + f);
        return s;
      },
      -search_radius, search_radius);
  for (const auto& p : pieces)
    r.rhs += p.measure * golden_section([&](double eta) { return value(p.a, p.b + eta); }, -search_radius, search_radius);
  r.margin = r.lhs - r.rhs;
  return r;
}

}  // namespace sdhom
