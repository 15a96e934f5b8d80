#include "sdhom/dirichlet.hpp"

#include <chrono>
#include <cmath>
#include <vector>

#include "sdhom/minimize.hpp"

namespace sdhom {

namespace {

struct RecordValues {
  std::vector<double>* values;
  bool operator()(const SpgState& s) const {
    values->push_back(s.value);
    return false;
  }
};

}  // namespace

DirichletMesh::DirichletMesh(int dim, int interior) : dim(dim), interior(interior) {
  if (dim < 1 || dim > 2) throw Error(ErrorCode::InvalidParameter, "Dirichlet meshes support N = 1, 2");
  if (interior < 8) throw Error(ErrorCode::InvalidParameter, "Dirichlet meshes need at least 8 interior nodes");
}

Index DirichletMesh::node_count() const { return dim == 1 ? interior : Index{interior} * interior; }

Index DirichletMesh::element_count() const {
  const Index cells = interior + 1;
  return dim == 1 ? cells : 2 * cells * cells;
}

double DirichletMesh::element_weight() const {
  const double h = spacing();
  return dim == 1 ? h : 0.5 * h * h;
}

double DirichletMesh::node_weight() const { return std::pow(spacing(), dim); }

Eigen::MatrixXd DirichletMesh::nodes() const {
  const double h = spacing();
  Eigen::MatrixXd x(dim, node_count());
  for (Index n = 0; n < node_count(); ++n) {
    if (dim == 1) {
      x(0, n) = static_cast<double>(n + 1) * h;
    } else {
      x(0, n) = static_cast<double>(n / interior + 1) * h;
      x(1, n) = static_cast<double>(n % interior + 1) * h;
    }
  }
  return x;
}

Eigen::MatrixXd DirichletMesh::centroids() const {
  const double h = spacing();
  const Index cells = interior + 1;
  Eigen::MatrixXd x(dim, element_count());
  for (Index e = 0; e < element_count(); ++e) {
    if (dim == 1) {
      x(0, e) = (static_cast<double>(e) + 0.5) * h;
    } else {
      const Index cell = e / 2, i = cell / cells, j = cell % cells;
      const double offset = e % 2 == 0 ? 1.0 / 3.0 : 2.0 / 3.0;
      x(0, e) = (static_cast<double>(i) + offset) * h;
      x(1, e) = (static_cast<double>(j) + offset) * h;
    }
  }
  return x;
}

DirichletOperators::DirichletOperators(const DirichletMesh& mesh) : mesh_(mesh) {
  const int d = mesh.dim;
  const int M = mesh.interior;
  const double inv_h = 1.0 / mesh.spacing();
  std::vector<Eigen::Triplet<double>> entries;
  // Grid node (i, j) with 0 <= i, j <= M + 1; boundary nodes carry no unknown.
  auto unknown = [&](Index i, Index j) -> Index {
    if (i < 1 || i > M) return -1;
    if (d == 1) return i - 1;
    if (j < 1 || j > M) return -1;
    return (i - 1) * M + (j - 1);
  };
  auto add = [&](Index row, Index i, Index j, double v) {
    const Index col = unknown(i, j);
    if (col >= 0) entries.emplace_back(row, col, v);
  };
  if (d == 1) {
    for (Index e = 0; e <= M; ++e) {
      add(e, e + 1, 0, inv_h);
      add(e, e, 0, -inv_h);
    }
  } else {
    const Index cells = M + 1;
    for (Index i = 0; i < cells; ++i)
      for (Index j = 0; j < cells; ++j) {
        const Index lower = 2 * (i * cells + j), upper = lower + 1;
        // Lower triangle (i,j), (i+1,j), (i,j+1).
        add(2 * lower, i + 1, j, inv_h);
        add(2 * lower, i, j, -inv_h);
        add(2 * lower + 1, i, j + 1, inv_h);
        add(2 * lower + 1, i, j, -inv_h);
        // Upper triangle (i+1,j+1), (i,j+1), (i+1,j).
        add(2 * upper, i + 1, j + 1, inv_h);
        add(2 * upper, i, j + 1, -inv_h);
        add(2 * upper + 1, i + 1, j + 1, inv_h);
        add(2 * upper + 1, i + 1, j, -inv_h);
      }
  }
  B_.resize(d * mesh.element_count(), mesh.node_count());
  B_.setFromTriplets(entries.begin(), entries.end());
  const Eigen::SparseMatrix<double> BtB = Eigen::SparseMatrix<double>(B_.transpose()) * B_;
  laplacian_.compute(BtB);
  if (laplacian_.info() != Eigen::Success) throw Error(ErrorCode::InvalidParameter, "discrete Laplacian is singular");
}

Eigen::MatrixXd DirichletOperators::gradient(const Eigen::VectorXd& u) const {
  const Eigen::VectorXd flat = B_ * u;
  return Eigen::Map<const Eigen::MatrixXd>(flat.data(), mesh_.dim, mesh_.element_count());
}

Eigen::VectorXd DirichletOperators::neg_divergence(const Eigen::MatrixXd& f) const {
  const Eigen::Map<const Eigen::VectorXd> flat(f.data(), f.size());
  return (mesh_.element_weight() / mesh_.node_weight()) * (B_.transpose() * flat);
}

Eigen::VectorXd DirichletOperators::potential(const Eigen::MatrixXd& f) const {
  const Eigen::Map<const Eigen::VectorXd> flat(f.data(), f.size());
  return laplacian_.solve(B_.transpose() * flat);
}

void DirichletOperators::project_range(Eigen::MatrixXd& f) const { f = gradient(potential(f)); }

void DirichletOperators::project_kernel(Eigen::MatrixXd& f) const { f -= gradient(potential(f)); }

Eigen::VectorXd DirichletOperators::poisson(const Eigen::VectorXd& rhs) const {
  return laplacian_.solve((mesh_.node_weight() / mesh_.element_weight()) * rhs);
}

double DirichletOperators::inner_elements(const Eigen::MatrixXd& f, const Eigen::MatrixXd& g) const {
  return mesh_.element_weight() * (f.array() * g.array()).sum();
}

double DirichletOperators::inner_nodes(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
  return mesh_.node_weight() * u.dot(v);
}

FluxField particular_flux(const DirichletOperators& ops, const Eigen::VectorXd& u_star) {
  if (u_star.size() != ops.mesh().node_count())
    throw Error(ErrorCode::GridMismatch, "source does not match the mesh");
  FluxField out;
  out.f = ops.gradient(ops.poisson(u_star));
  out.divergence = ops.neg_divergence(out.f);
  return out;
}

DirichletProblem::DirichletProblem(const OmegaLagrangian& L, const DirichletMesh& mesh, DirichletOptions options)
    : DirichletProblem(SampledLagrangian::sample(L, mesh.centroids() / options.eps), mesh, options) {
  if (options_.require_growth && !L.growth())
    throw Error(ErrorCode::CoercivityMissing, "the Lagrangian carries no growth record");
}

DirichletProblem::DirichletProblem(SampledLagrangian L, const DirichletMesh& mesh, DirichletOptions options)
    : ops_(mesh), sampled_(std::move(L)), options_(std::move(options)) {
  if (!(options_.eps > 0.0)) throw Error(ErrorCode::InvalidParameter, "eps must be positive");
  if (sampled_.size() != mesh.element_count() || sampled_.dim() != mesh.dim)
    throw Error(ErrorCode::GridMismatch, "sampled Lagrangian does not match the mesh");
  if (!sampled_.smooth())
    for (double lambda : options_.continuation) smoothed_.push_back(sampled_.smoothed(lambda));
}

double DirichletProblem::energy(const Eigen::MatrixXd& A, const Eigen::MatrixXd& F) const {
  return ops_.mesh().element_weight() * sampled_.total(A, F);
}

Eigen::VectorXd DirichletProblem::local_gaps(const Eigen::MatrixXd& A, const Eigen::MatrixXd& F) const {
  Eigen::VectorXd g(A.cols());
  for (Index e = 0; e < A.cols(); ++e)
    g[e] = sampled_.value(e, A.col(e), F.col(e)) - A.col(e).dot(F.col(e));
  return g;
}

DirichletProblem::Minimized DirichletProblem::minimize(const Eigen::MatrixXd& base_a, const Eigen::MatrixXd& base_b,
                                                       bool free_first, const Extra& extra) const {
  const int d = ops_.mesh().dim;
  const Index E = ops_.mesh().element_count();
  const Index m = d * E;
  const double w = ops_.mesh().element_weight();
  Eigen::MatrixXd X(d, E), Y(d, E), gX, gY, A(d, E), F(d, E);

  auto project = [&](Eigen::VectorXd& v) {
    Eigen::MatrixXd first = Eigen::Map<Eigen::MatrixXd>(v.data(), d, E);
    Eigen::MatrixXd second = Eigen::Map<Eigen::MatrixXd>(v.data() + m, d, E);
    if (free_first) {
      ops_.project_range(first);
    } else {
      first.setZero();
    }
    ops_.project_kernel(second);
    Eigen::Map<Eigen::MatrixXd>(v.data(), d, E) = first;
    Eigen::Map<Eigen::MatrixXd>(v.data() + m, d, E) = second;
  };
  auto objective_for = [&](const SampledLagrangian& S) {
    return [&, S_ptr = &S](const Eigen::VectorXd& v, Eigen::VectorXd& grad) {
      X = Eigen::Map<const Eigen::MatrixXd>(v.data(), d, E);
      Y = Eigen::Map<const Eigen::MatrixXd>(v.data() + m, d, E);
      A = base_a + X;
      F = base_b + Y;
      const double total = S_ptr->total(A, F, &gX, &gY);
      if (!is_finite(total)) return kInfinity;
      gX *= w;
      gY *= w;
      double value = w * total;
      if (extra) value += extra(X, Y, gX, gY);
      grad.resize(2 * m);
      grad.head(m) = Eigen::Map<const Eigen::VectorXd>(gX.data(), m);
      grad.tail(m) = Eigen::Map<const Eigen::VectorXd>(gY.data(), m);
      return value;
    };
  };

  SpgOptions spg;
  spg.max_iter = options_.max_iter;
  spg.tol = options_.residual_floor;
  spg.weight = w;
  Minimized out;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2 * m);
  SpgResult r;
  if (smoothed_.empty()) {
    r = minimize_projected(objective_for(sampled_), project, x, spg, RecordValues{&out.history});
    out.iterations = r.iterations;
  } else {
    for (const auto& stage : smoothed_) {
      r = minimize_projected(objective_for(stage), project, x, spg, RecordValues{&out.history});
      x = r.x;
      out.iterations += r.iterations;
    }
  }
  out.first = Eigen::Map<const Eigen::MatrixXd>(r.x.data(), d, E);
  out.second = Eigen::Map<const Eigen::MatrixXd>(r.x.data() + m, d, E);
  out.residual = r.residual;
  out.value = r.value;
  if (!smoothed_.empty()) {
    // Report with the original Lagrangian.
    Eigen::MatrixXd ga, gb;
    A = base_a + out.first;
    F = base_b + out.second;
    out.value = energy(A, F) + (extra ? extra(out.first, out.second, ga, gb) : 0.0);
  }
  return out;
}

double DirichletProblem::lifted_value(const Eigen::VectorXd& u, const Eigen::VectorXd& u_star,
                                      Eigen::MatrixXd* flux) const {
  const Eigen::MatrixXd A = ops_.gradient(u);
  const FluxField f0 = particular_flux(ops_, u_star);
  const Minimized r = minimize(A, f0.f, false, {});
  if (!std::isfinite(r.value))
    throw SolverStalledError("lifted value is infinite: the pair leaves the table domain", r.history);
  if (flux) *flux = f0.f + r.second;
  return r.value;
}

SolverReport DirichletProblem::solve(const Eigen::VectorXd& u_star) const {
  const auto start = std::chrono::steady_clock::now();
  const FluxField f0 = particular_flux(ops_, u_star);
  const int d = ops_.mesh().dim;
  const Index E = ops_.mesh().element_count();
  const double w = ops_.mesh().element_weight();
  // I = sum w L(A, f0 + f') - <A, f0>; on the constraint set this is
  // sum w (L(A, F) - <A, F>) >= 0.
  const Extra coupling = [&](const Eigen::MatrixXd& X, const Eigen::MatrixXd&, Eigen::MatrixXd& gX, Eigen::MatrixXd&) {
    gX -= w * f0.f;
    return -w * (X.array() * f0.f.array()).sum();
  };
  const Minimized r = minimize(Eigen::MatrixXd::Zero(d, E), f0.f, true, coupling);

  SolverReport report;
  report.gradient = r.first;
  report.u = ops_.potential(r.first);
  report.flux.f = f0.f + r.second;
  report.flux.divergence = ops_.neg_divergence(report.flux.f);
  report.energy = energy(report.gradient, report.flux.f);
  report.gap = report.energy - ops_.inner_nodes(report.u, u_star);
  report.max_local_gap = local_gaps(report.gradient, report.flux.f).maxCoeff();
  report.iterations = r.iterations;
  report.gap_history = r.history;
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!(report.gap <= options_.tolerance()))
    throw SolverStalledError("Dirichlet solve stalled with gap " + std::to_string(report.gap), r.history);
  return report;
}

SolverReport solve_dirichlet(const OmegaLagrangian& L, const DirichletMesh& mesh, const Eigen::VectorXd& u_star,
                             const DirichletOptions& options) {
  return DirichletProblem(L, mesh, options).solve(u_star);
}

double lifted_value(const OmegaLagrangian& L, const DirichletMesh& mesh, const Eigen::VectorXd& u,
                    const Eigen::VectorXd& u_star, const DirichletOptions& options) {
  DirichletOptions opt = options;
  opt.require_growth = false;
  return DirichletProblem(L, mesh, opt).lifted_value(u, u_star);
}

BrlProjection brl_project(const DirichletProblem& problem, const Eigen::VectorXd& u0, const Eigen::VectorXd& u0_star) {
  const DirichletOperators& ops = problem.operators();
  const double w = ops.mesh().element_weight();
  const Eigen::MatrixXd Du0 = ops.gradient(u0);
  const FluxField f0 = particular_flux(ops, u0_star);

  BrlProjection out;
  const double value0 = problem.lifted_value(u0, u0_star);
  const double pairing0 = ops.inner_nodes(u0, u0_star);
  out.eps = std::max(0.0, value0 - pairing0);

  // Variables V = Dv and f'; the flux is f0* - V + f', which realises
  // u* = u0* - Jv. Objective:
  //   sum w L(Du0 + V, f0* - V + f') - <V, f0*> + <Du0, V> - <Du0, f0*> + |V|^2,
  // whose minimum is zero.
  const int d = ops.mesh().dim;
  const Index E = ops.mesh().element_count();
  const SampledLagrangian& S = problem.sampled();
  Eigen::MatrixXd A(d, E), F(d, E), gA, gF;
  const double constant = -ops.inner_elements(Du0, f0.f);
  const Index m = d * E;

  auto project = [&](Eigen::VectorXd& v) {
    Eigen::MatrixXd first = Eigen::Map<Eigen::MatrixXd>(v.data(), d, E);
    Eigen::MatrixXd second = Eigen::Map<Eigen::MatrixXd>(v.data() + m, d, E);
    ops.project_range(first);
    ops.project_kernel(second);
    Eigen::Map<Eigen::MatrixXd>(v.data(), d, E) = first;
    Eigen::Map<Eigen::MatrixXd>(v.data() + m, d, E) = second;
  };
  auto objective_for = [&](const SampledLagrangian& L) {
    return [&, L_ptr = &L](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
      const Eigen::Map<const Eigen::MatrixXd> V(x.data(), d, E), Fp(x.data() + m, d, E);
      A = Du0 + V;
      F = f0.f - V + Fp;
      const double total = L_ptr->total(A, F, &gA, &gF);
      if (!is_finite(total)) return kInfinity;
      const double value = w * total + w * ((V.array() * (Du0 - f0.f).array()).sum() + V.squaredNorm()) + constant;
      const Eigen::MatrixXd gV = w * (gA - gF + Du0 - f0.f + 2.0 * V);
      const Eigen::MatrixXd gP = w * gF;
      grad.resize(2 * m);
      grad.head(m) = Eigen::Map<const Eigen::VectorXd>(gV.data(), m);
      grad.tail(m) = Eigen::Map<const Eigen::VectorXd>(gP.data(), m);
      return value;
    };
  };
  SpgOptions spg;
  spg.max_iter = problem.options().max_iter;
  spg.tol = problem.options().residual_floor;
  spg.weight = w;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2 * m);
  SpgResult r;
  if (S.smooth()) {
    r = minimize_projected(objective_for(S), project, x, spg);
  } else {
    for (double lambda : problem.options().continuation) {
      r = minimize_projected(objective_for(S.smoothed(lambda)), project, x, spg);
      x = r.x;
    }
  }
  if (!std::isfinite(r.value)) throw SolverStalledError("graph projection left the table domain", r.history);

  const Eigen::MatrixXd V = Eigen::Map<const Eigen::MatrixXd>(r.x.data(), d, E);
  const Eigen::VectorXd v = ops.potential(V);
  out.u = u0 + v;
  out.u_star = u0_star - ops.neg_divergence(V);
  const double norm_v = std::sqrt(ops.inner_elements(V, V));
  out.distance_u = norm_v;
  out.distance_u_star = norm_v;
  const double value1 = problem.lifted_value(out.u, out.u_star);
  out.gap = value1 - ops.inner_nodes(out.u, out.u_star);
  out.value_change = std::abs(value1 - value0);
  const double norm_u0 = std::sqrt(ops.inner_elements(Du0, Du0));
  const double norm_u0_star = std::sqrt(ops.inner_elements(f0.f, f0.f));
  out.value_bound = 2.0 * out.eps + std::sqrt(out.eps) * (norm_u0 + norm_u0_star);
  return out;
}

BrlPoint brl_project(const RegionLagrangian& L, const Point& u0, const Point& u0_star) {
  const int d = L.dim();
  BrlPoint out;
  const double value0 = L.value(u0, u0_star);
  out.eps = std::max(0.0, value0 - u0.dot(u0_star));
  Point ga, gb;
  auto objective = [&](const Eigen::VectorXd& v, Eigen::VectorXd& grad) {
    const Point vv = v;
    const double value = L.value(u0 + vv, u0_star - vv, &ga, &gb);
    if (!is_finite(value)) return kInfinity;
    grad = Eigen::VectorXd(ga - gb) + Eigen::VectorXd(u0 - u0_star) + 2.0 * v;
    return value - vv.dot(u0_star) + u0.dot(vv) - u0.dot(u0_star) + vv.squaredNorm();
  };
  SpgOptions spg;
  spg.tol = 1e-12;
  const SpgResult r = minimize_projected(objective, [](Eigen::VectorXd&) {}, Eigen::VectorXd::Zero(d), spg);
  const Point v = r.x;
  out.u = u0 + v;
  out.u_star = u0_star - v;
  out.distance_u = out.distance_u_star = v.norm();
  out.value_change = std::abs(L.value(out.u, out.u_star) - value0);
  out.value_bound = 2.0 * out.eps + std::sqrt(out.eps) * (u0.norm() + u0_star.norm());
  return out;
}

}  // namespace sdhom
