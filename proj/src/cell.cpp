#include "sdhom/cell.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sdhom/minimize.hpp"
#include "sdhom/parallel.hpp"

namespace sdhom {

namespace {

std::string describe(const Point& a, const Point& b) {
  std::ostringstream os;
  os << "a = (" << a.transpose() << "), b = (" << b.transpose() << ")";
  return os.str();
}

// Runs solve(row, col, warm) over a rows x cols table; each row is one job
// swept in order so that neighbouring nodes warm-start each other.
template <class Solve>
void for_each_node(Index rows, Index cols, int threads, Solve&& solve) {
  parallel_for(rows, threads, [&](Index r) {
    std::optional<CellSolution> warm;
    for (Index c = 0; c < cols; ++c) warm = solve(r, c, warm ? &*warm : nullptr);
  });
}

}  // namespace

CellProblem::CellProblem(const OmegaLagrangian& L, const CellGrid& grid, CellOptions options)
    : calc_(grid), options_(std::move(options)) {
  if (L.dim() != grid.dim) throw Error(ErrorCode::GridMismatch, "cell grid and Lagrangian dimensions differ");
  sampled_ = SampledLagrangian::sample(L, grid.centers());
  if (!sampled_.smooth())
    for (double lambda : options_.continuation) smoothed_.push_back(sampled_.smoothed(lambda));
}

double CellProblem::energy(const Point& a, const Point& b, const Eigen::MatrixXd& V, const Eigen::MatrixXd& g) const {
  const Eigen::MatrixXd A = V.colwise() + Eigen::VectorXd(a);
  const Eigen::MatrixXd F = g.colwise() + Eigen::VectorXd(b);
  return sampled_.total(A, F) / static_cast<double>(sampled_.size());
}

CellSolution CellProblem::solve(const Point& a, const Point& b, const CellSolution* warm) const {
  return run(a, b, warm, false);
}

CellSolution CellProblem::solve_dual(const Point& p, const Point& q, const CellSolution* warm) const {
  return run(p, q, warm, true);
}

CellSolution CellProblem::run(const Point& a, const Point& b, const CellSolution* warm, bool dual) const {
  const int d = grid().dim;
  const Index K = grid().size();
  const Index m = d * K;
  if (a.size() != d || b.size() != d) throw Error(ErrorCode::InvalidParameter, "cell point has the wrong dimension");
  const Eigen::VectorXd shift_a = a, shift_b = b;

  // x = [first-argument perturbation, second-argument perturbation]. The
  // primal problem perturbs a by gradients and b by solenoidal fields; the
  // dual problem swaps the two spaces.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2 * m);
  if (warm && warm->gradient.size() == m && warm->corrector.g.size() == m) {
    Eigen::Map<Eigen::MatrixXd>(x.data(), d, K) = dual ? warm->corrector.g : warm->gradient;
    Eigen::Map<Eigen::MatrixXd>(x.data() + m, d, K) = dual ? warm->gradient : warm->corrector.g;
  }

  auto project = [&](Eigen::VectorXd& v) {
    Eigen::MatrixXd first = Eigen::Map<Eigen::MatrixXd>(v.data(), d, K);
    Eigen::MatrixXd second = Eigen::Map<Eigen::MatrixXd>(v.data() + m, d, K);
    if (dual) {
      calc_.project_solenoidal(first);
      calc_.project_gradients(second);
    } else {
      calc_.project_gradients(first);
      calc_.project_solenoidal(second);
    }
    Eigen::Map<Eigen::MatrixXd>(v.data(), d, K) = first;
    Eigen::Map<Eigen::MatrixXd>(v.data() + m, d, K) = second;
  };
  project(x);

  const double inv_k = 1.0 / static_cast<double>(K);
  Eigen::MatrixXd A(d, K), F(d, K), gA, gF;
  auto objective_for = [&](const SampledLagrangian& S) {
    return [&, S_ptr = &S](const Eigen::VectorXd& v, Eigen::VectorXd& grad) {
      A = Eigen::Map<const Eigen::MatrixXd>(v.data(), d, K).colwise() + shift_a;
      F = Eigen::Map<const Eigen::MatrixXd>(v.data() + m, d, K).colwise() + shift_b;
      const double total = dual ? S_ptr->total_conjugate(A, F, &gA, &gF) : S_ptr->total(A, F, &gA, &gF);
      if (!is_finite(total)) return kInfinity;
      grad.resize(2 * m);
      grad.head(m) = Eigen::Map<const Eigen::VectorXd>(gA.data(), m) * inv_k;
      grad.tail(m) = Eigen::Map<const Eigen::VectorXd>(gF.data(), m) * inv_k;
      return total * inv_k;
    };
  };

  SpgOptions spg;
  spg.max_iter = options_.max_iter;
  spg.tol = options_.tolerance();
  spg.weight = inv_k;

  CellSolution out;
  std::vector<double> history;
  SpgResult result;
  if (smoothed_.empty()) {
    result = minimize_projected(objective_for(sampled_), project, x, spg);
    history = result.history;
  } else {
    for (std::size_t s = 0; s < smoothed_.size(); ++s) {
      SpgOptions stage = spg;
      if (s + 1 < smoothed_.size()) stage.tol = 10.0 * spg.tol;
      result = minimize_projected(objective_for(smoothed_[s]), project, x, stage);
      history.insert(history.end(), result.history.begin(), result.history.end());
      x = result.x;
      out.iterations += result.iterations;
    }
  }
  if (!(result.residual <= spg.tol) || !std::isfinite(result.value))
    throw SolverStalledError("cell problem stalled at " + describe(a, b) + " with residual " +
                                 std::to_string(result.residual),
                             history);

  const Eigen::MatrixXd first = Eigen::Map<const Eigen::MatrixXd>(result.x.data(), d, K);
  const Eigen::MatrixXd second = Eigen::Map<const Eigen::MatrixXd>(result.x.data() + m, d, K);
  out.a = a;
  out.b = b;
  out.gradient = dual ? second : first;
  out.corrector.g = dual ? first : second;
  out.corrector.phi = calc_.potential(out.gradient);
  out.kkt_residual = result.residual;
  if (smoothed_.empty()) {
    out.iterations = result.iterations;
    out.value = result.value;
  } else {
    A = first.colwise() + shift_a;
    F = second.colwise() + shift_b;
    out.value = (dual ? sampled_.total_conjugate(A, F) : sampled_.total(A, F)) * inv_k;
  }
  return out;
}

CellSolution solve_cell(const OmegaLagrangian& L, const Point& a, const Point& b, const CellGrid& grid,
                        const CellOptions& options) {
  return CellProblem(L, grid, options).solve(a, b);
}

BoundsReport hom_bounds_check(const TabulatedFunction& table, const std::optional<LagrangianGrowth>& growth,
                              const OmegaLagrangian* L, const CellGrid* grid, double tol) {
  if (table.arity() != 2) throw Error(ErrorCode::InvalidParameter, "bounds check needs a two-argument table");
  const int d = table.factor(0).dim;
  BoundsReport report;
  report.tolerance_used = tol;
  std::optional<SampledLagrangian> sampled;
  if (L && grid) sampled = SampledLagrangian::sample(*L, grid->centers());
  for (Index i = 0; i < table.size(); ++i) {
    const double v = table[i];
    if (!is_finite(v)) continue;
    const Point z = table.node(i);
    const Point a = z.head(d), b = z.tail(d);
    double margin = kInfinity;
    if (growth) margin = std::min({margin, v - growth->lower(a, b), growth->upper(a, b) - v});
    if (sampled) {
      double mean = 0.0;
      for (Index k = 0; k < sampled->size(); ++k) mean += sampled->value(k, a, b);
      margin = std::min(margin, mean / static_cast<double>(sampled->size()) - v);
    }
    ++report.nodes_checked;
    if (margin < report.worst_margin) {
      report.worst_margin = margin;
      report.worst_node = z;
    }
    if (margin < -(tol + 1e-9 * std::abs(v))) {
      ++report.violations;
      report.flagged.push_back(i);
    }
  }
  return report;
}

HomLagrangian tabulate_hom(const OmegaLagrangian& L, const BoxGrid& a_grid, const BoxGrid& b_grid,
                           const CellGrid& grid, const TabulateOptions& options) {
  const CellProblem problem(L, grid, options.cell);
  HomLagrangian hom;
  hom.cell = grid;
  hom.growth = L.growth();
  const Index na = a_grid.node_count(), nb = b_grid.node_count();
  hom.table = TabulatedFunction({a_grid, b_grid}, Eigen::VectorXd::Zero(na * nb), Interpolation::cubic);
  hom.residuals = Eigen::VectorXd::Zero(na * nb);
  hom.iterations = Eigen::VectorXi::Zero(na * nb);
  const int d = a_grid.dim;

  for_each_node(na, nb, options.threads, [&](Index r, Index c, const CellSolution* warm) {
    const Index i = r * nb + c;
    const Point z = hom.table.node(i);
    CellSolution s = problem.solve(z.head(d), z.tail(d), warm);
    hom.table.values()[i] = s.value;
    hom.residuals[i] = s.kkt_residual;
    hom.iterations[i] = s.iterations;
    return s;
  });

  if (options.run_checks) {
    GapOptions gap;
    gap.tol_gap = options.tol_gap + options.gap_slope * (hom.table.max_spacing() + grid.spacing());
    gap.tol_convexity = gap.tol_gap;
    try {
      hom.selfdual = selfdual_gap_check(hom.table, gap);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NotConvex) throw;
      hom.selfdual.max_gap = kInfinity;
      hom.selfdual.tolerance_used = gap.tol_gap;
    }
    hom.bounds = hom_bounds_check(hom.table, hom.growth, &L, &grid);
  }
  return hom;
}

DualCellReport dual_cell_check(const OmegaLagrangian& L, const HomLagrangian& hom, const DualCheckOptions& options) {
  const TabulatedFunction& table = hom.table;
  const BoxGrid& ag = table.factor(0);
  const BoxGrid& bg = table.factor(1);
  // p pairs with a and ranges like b; q pairs with b and ranges like a.
  const int pts_p = options.points_per_axis > 0 ? options.points_per_axis : bg.points_per_axis;
  const int pts_q = options.points_per_axis > 0 ? options.points_per_axis : ag.points_per_axis;
  const BoxGrid pg(bg.dim, options.shrink * bg.radius, pts_p);
  const BoxGrid qg(ag.dim, options.shrink * ag.radius, pts_q);
  const ConjugateTable route_i = conjugate(table, {pg, qg});

  DualCellReport report;
  report.tolerance_used = options.tol;
  report.route_i = route_i.table;
  report.route_ii = TabulatedFunction({pg, qg}, Eigen::VectorXd::Constant(route_i.table.size(), kInfinity),
                                      table.rule());
  const CellProblem problem(L, hom.cell, options.cell);
  const int d = ag.dim;
  const Index np = pg.node_count(), nq = qg.node_count();
  for_each_node(np, nq, options.threads, [&](Index r, Index c, const CellSolution* warm) -> CellSolution {
    const Index i = r * nq + c;
    if (route_i.boundary_argmax[static_cast<std::size_t>(i)]) return warm ? *warm : CellSolution{};
    const Point z = report.route_ii.node(i);
    CellSolution s = problem.solve_dual(z.head(d), z.tail(d), warm);
    report.route_ii.values()[i] = s.value;
    return s;
  });

  for (Index i = 0; i < route_i.table.size(); ++i) {
    if (route_i.boundary_argmax[static_cast<std::size_t>(i)]) {
      ++report.nodes_skipped;
      continue;
    }
    ++report.nodes_compared;
    const double diff = std::abs(route_i.table[i] - report.route_ii[i]);
    if (!(diff <= report.max_discrepancy)) {
      report.max_discrepancy = diff;
      report.argmax_point = route_i.table.node(i);
    }
  }
  report.coverage = static_cast<double>(report.nodes_compared) / static_cast<double>(route_i.table.size());
  return report;
}

SubdiffAverage subdiff_average(const CellProblem& problem, const CellSolution& solution, double threshold) {
  const SampledLagrangian& S = problem.sampled();
  const SampledLagrangian& smooth = problem.smoothing_stages().empty() ? S : problem.smoothing_stages().back();
  const int d = problem.grid().dim;
  const Index K = S.size();
  SubdiffAverage out;
  out.da = Point::Zero(d);
  out.db = Point::Zero(d);
  out.lo = Point::Zero(2 * d);
  out.hi = Point::Zero(2 * d);
  Point ga, gb;
  for (Index k = 0; k < K; ++k) {
    const Point a = solution.a + Point(solution.gradient.col(k));
    const Point b = solution.b + Point(solution.corrector.g.col(k));
    smooth.value(k, a, b, &ga, &gb);
    out.da += ga;
    out.db += gb;
    if (S.region(k).smooth()) {
      out.lo.head(d) += ga;
      out.lo.tail(d) += gb;
      out.hi.head(d) += ga;
      out.hi.tail(d) += gb;
      continue;
    }
    Point z(2 * d);
    z << a, b;
    const double f0 = S.value(k, a, b);
    for (int j = 0; j < 2 * d; ++j) {
      const double delta = 1e-7 * std::max(1.0, std::abs(z[j]));
      Point zp = z, zm = z;
      zp[j] += delta;
      zm[j] -= delta;
      const double right = (S.value(k, zp.head(d), zp.tail(d)) - f0) / delta;
      const double left = (f0 - S.value(k, zm.head(d), zm.tail(d))) / delta;
      out.lo[j] += std::min(left, right);
      out.hi[j] += std::max(left, right);
    }
  }
  const double inv_k = 1.0 / static_cast<double>(K);
  out.da *= inv_k;
  out.db *= inv_k;
  out.lo *= inv_k;
  out.hi *= inv_k;
  out.set_valued = (out.hi - out.lo).maxCoeff() > threshold;
  return out;
}

double HomGraph::slope() const {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < xi.size(); ++i) {
    num += xi[i][0] * images[i].center[0];
    den += xi[i][0] * xi[i][0];
  }
  return den > 0.0 ? num / den : 0.0;
}

HomGraph beta_hom_extract(const TabulatedFunction& table, const GraphOptions& options, double monotone_tol) {
  const BoxGrid& ag = table.factor(0);
  const BoxGrid& bg = table.factor(1);
  const TabulatedFunction a_nodes({ag}, Eigen::VectorXd::Zero(ag.node_count()));
  const double edge = bg.radius - 0.5 * bg.spacing();
  HomGraph graph;
  for (Index i = 0; i < a_nodes.size(); ++i) {
    const Point a = a_nodes.node(i);
    GraphImage image;
    try {
      image = graph_extract(table, a, options);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyImage) throw;
      continue;
    }
    // Images touching the box edge are truncated by the table.
    if (image.lo.cwiseAbs().maxCoeff() >= edge || image.hi.cwiseAbs().maxCoeff() >= edge) continue;
    graph.xi.push_back(a);
    graph.images.push_back(std::move(image));
  }
  const double tol = monotone_tol > 0.0 ? monotone_tol : bg.spacing();
  for (std::size_t i = 0; i < graph.xi.size(); ++i)
    for (std::size_t j = i + 1; j < graph.xi.size(); ++j) {
      const Point dx = graph.xi[j] - graph.xi[i];
      const double pairing = dx.dot(graph.images[j].center - graph.images[i].center);
      if (pairing < -tol * dx.norm()) {
        std::ostringstream os;
        os << "extracted graph is not monotone between xi = (" << graph.xi[i].transpose() << ") and ("
           << graph.xi[j].transpose() << "); the table is under-resolved";
        throw Error(ErrorCode::NonMonotoneGraph, os.str());
      }
    }
  return graph;
}

OmegaPotential OmegaPotential::from_field(const MonotoneField& beta) {
  beta.validate();
  if (beta.kind == FieldKind::sampled_graph_1d)
    throw Error(ErrorCode::InvalidParameter, "sampled graphs carry no potential");
  OmegaPotential out;
  out.dim = beta.dim;
  for (const auto& r : beta.regions) {
    const Point drift = beta.kind == FieldKind::potential_plus_skew ? r.drift : Point::Zero(beta.dim);
    auto L = std::make_shared<PotentialLagrangian>(beta.dim, r.coefficient, beta.p, drift,
                                                   SmallMatrix::Zero(beta.dim, beta.dim));
    out.boxes.push_back(r.box);
    out.phi.push_back([L](const Point& a, Point* grad) { return L->phi(a, grad); });
  }
  return out;
}

int OmegaPotential::region_at(const Point& x) const {
  Point y = x;
  for (Index i = 0; i < y.size(); ++i) {
    y[i] -= std::floor(y[i]);
    if (y[i] >= 1.0) y[i] = 0.0;
  }
  for (std::size_t r = 0; r < boxes.size(); ++r)
    if (boxes[r].contains(y)) return static_cast<int>(r);
  throw Error(ErrorCode::InvalidParameter, "cell point is not covered by any region");
}

PsiSolution psi_hom(const OmegaPotential& phi, const Point& a, const CellGrid& grid, const CellOptions& options) {
  if (phi.dim != grid.dim || a.size() != grid.dim)
    throw Error(ErrorCode::GridMismatch, "potential, point and cell grid dimensions differ");
  const PeriodicCalculus calc(grid);
  const int d = grid.dim;
  const Index K = grid.size(), m = d * K;
  const Eigen::MatrixXd centers = grid.centers();
  std::vector<int> region(static_cast<std::size_t>(K));
  for (Index k = 0; k < K; ++k) region[static_cast<std::size_t>(k)] = phi.region_at(centers.col(k));
  const double inv_k = 1.0 / static_cast<double>(K);
  const Eigen::VectorXd shift = a;

  auto objective = [&](const Eigen::VectorXd& v, Eigen::VectorXd& grad) {
    grad.resize(m);
    double total = 0.0;
    Point g;
    for (Index k = 0; k < K; ++k) {
      const Point z = Eigen::VectorXd(v.segment(k * d, d) + shift);
      total += phi.phi[static_cast<std::size_t>(region[static_cast<std::size_t>(k)])](z, &g);
      grad.segment(k * d, d) = g * inv_k;
    }
    return total * inv_k;
  };
  auto project = [&](Eigen::VectorXd& v) {
    Eigen::MatrixXd V = Eigen::Map<Eigen::MatrixXd>(v.data(), d, K);
    calc.project_gradients(V);
    Eigen::Map<Eigen::MatrixXd>(v.data(), d, K) = V;
  };
  SpgOptions spg;
  spg.max_iter = options.max_iter;
  spg.tol = options.tolerance();
  spg.weight = inv_k;
  const SpgResult r = minimize_projected(objective, project, Eigen::VectorXd::Zero(m), spg);
  if (!(r.residual <= spg.tol))
    throw SolverStalledError("potential cell problem stalled with residual " + std::to_string(r.residual), r.history);
  PsiSolution out;
  out.value = r.value;
  out.phi = calc.potential(Eigen::Map<const Eigen::MatrixXd>(r.x.data(), d, K));
  out.kkt_residual = r.residual;
  out.iterations = r.iterations;
  return out;
}

}  // namespace sdhom
