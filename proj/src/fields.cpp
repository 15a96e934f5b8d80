#include "sdhom/fields.hpp"

#include <algorithm>
#include <cmath>

namespace sdhom {

namespace {

double power_gradient_scale(double n, double c, double p) {
  if (n == 0.0) return 0.0;
  return p == 2.0 ? c : c * std::pow(n, p - 2.0);
}

Point grid_point(int dim, double radius, int samples, Index flat) {
  Point xi(dim);
  const double h = samples > 1 ? 2.0 * radius / (samples - 1) : 0.0;
  for (int d = dim - 1; d >= 0; --d) {
    xi[d] = samples > 1 ? -radius + static_cast<double>(flat % samples) * h : 0.0;
    flat /= samples;
  }
  return xi;
}

Index int_pow(int base, int exp) {
  Index r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

bool is_skew(const SmallMatrix& g) { return (g + g.transpose()).cwiseAbs().maxCoeff() == 0.0; }

}  // namespace

const char* to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::linear: return "linear";
    case FieldKind::power: return "power";
    case FieldKind::potential_plus_skew: return "potential_plus_skew";
    case FieldKind::sampled_graph_1d: return "sampled_graph_1d";
  }
  return "unknown";
}

FieldKind field_kind_from_string(const std::string& name) {
  if (name == "linear") return FieldKind::linear;
  if (name == "power") return FieldKind::power;
  if (name == "potential_plus_skew") return FieldKind::potential_plus_skew;
  if (name == "sampled_graph_1d") return FieldKind::sampled_graph_1d;
  throw Error(ErrorCode::InvalidParameter, "unknown field kind '" + name + "'");
}

int MonotoneField::region_at(const Point& x) const {
  Point y(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    y[i] = x[i] - std::floor(x[i]);
    if (y[i] >= 1.0) y[i] = 0.0;
  }
  for (std::size_t r = 0; r < regions.size(); ++r)
    if (regions[r].box.contains(y)) return static_cast<int>(r);
  throw Error(ErrorCode::DomainEmpty, "point of the unit cell is not covered by any region");
}

void MonotoneField::validate() const {
  if (dim < 1 || dim > 2) throw Error(ErrorCode::InvalidParameter, "fields are supported for N = 1, 2");
  if (!(p > 1.0)) throw Error(ErrorCode::InvalidParameter, "exponent p must exceed 1");
  if (regions.empty()) throw Error(ErrorCode::InvalidParameter, "a field needs at least one region");
  if (growth) {
    if (!(growth->c1 > 0.0) || !(growth->c2 > 0.0) || growth->m1 < 0.0 || growth->m2 < 0.0)
      throw Error(ErrorCode::InvalidParameter, "growth record needs c1, c2 > 0 and m1, m2 >= 0");
    if (growth->p != p) throw Error(ErrorCode::InvalidParameter, "growth exponent differs from the field exponent");
  }
  for (std::size_t r = 0; r < regions.size(); ++r) {
    const auto& reg = regions[r];
    const std::string where = "region " + std::to_string(r) + ": ";
    if (reg.box.lo.size() != dim || reg.box.hi.size() != dim)
      throw Error(ErrorCode::InvalidParameter, where + "cell box has the wrong dimension");
    if (!std::isfinite(reg.coefficient) || reg.coefficient < 0.0)
      throw Error(ErrorCode::InvalidParameter, where + "coefficient must be finite and nonnegative");
    if (kind == FieldKind::linear && p != 2.0) throw Error(ErrorCode::InvalidParameter, "linear fields have p = 2");
    if (kind == FieldKind::potential_plus_skew) {
      if (reg.drift.size() != dim || reg.gamma.rows() != dim || reg.gamma.cols() != dim)
        throw Error(ErrorCode::InvalidParameter, where + "drift or gamma has the wrong size");
      if (!is_skew(reg.gamma)) throw Error(ErrorCode::InvalidParameter, where + "gamma must satisfy gamma^T = -gamma");
    }
    if (kind == FieldKind::sampled_graph_1d) {
      if (dim != 1) throw Error(ErrorCode::InvalidParameter, "sampled graphs are one-dimensional");
      if (reg.graph.empty()) throw Error(ErrorCode::DomainEmpty, where + "empty graph sample");
      for (std::size_t i = 1; i < reg.graph.size(); ++i)
        if (reg.graph[i].first < reg.graph[i - 1].first || reg.graph[i].second < reg.graph[i - 1].second)
          throw Error(ErrorCode::InvalidParameter, where + "graph points must be nondecreasing in both coordinates");
    }
  }
}

std::vector<Point> MonotoneField::image(int region, const Point& xi) const {
  const auto& reg = regions.at(static_cast<std::size_t>(region));
  switch (kind) {
    case FieldKind::linear:
    case FieldKind::power:
      return {power_gradient_scale(xi.norm(), reg.coefficient, p) * xi};
    case FieldKind::potential_plus_skew: {
      Point eta = power_gradient_scale(xi.norm(), reg.coefficient, p) * xi + reg.drift;
      eta.noalias() += reg.gamma * xi;
      return {eta};
    }
    case FieldKind::sampled_graph_1d: {
      const auto& g = reg.graph;
      const double x = xi[0];
      // Constant extension beyond the sampled range.
      if (x <= g.front().first) {
        double lo = g.front().second, hi = lo;
        for (const auto& pt : g)
          if (pt.first == g.front().first) hi = pt.second;
        return x < g.front().first ? std::vector<Point>{Point::Constant(1, lo)}
                                   : std::vector<Point>{Point::Constant(1, lo), Point::Constant(1, hi)};
      }
      if (x >= g.back().first) {
        double hi = g.back().second, lo = hi;
        for (const auto& pt : g)
          if (pt.first == g.back().first) {
            lo = pt.second;
            break;
          }
        return x > g.back().first ? std::vector<Point>{Point::Constant(1, hi)}
                                  : std::vector<Point>{Point::Constant(1, lo), Point::Constant(1, hi)};
      }
      double lo = kInfinity, hi = -kInfinity;
      for (const auto& pt : g)
        if (pt.first == x) {
          lo = std::min(lo, pt.second);
          hi = std::max(hi, pt.second);
        }
      if (lo <= hi) {
        if (lo == hi) return {Point::Constant(1, lo)};
        return {Point::Constant(1, lo), Point::Constant(1, hi)};
      }
      for (std::size_t i = 1; i < g.size(); ++i)
        if (g[i - 1].first < x && x < g[i].first) {
          const double t = (x - g[i - 1].first) / (g[i].first - g[i - 1].first);
          return {Point::Constant(1, (1.0 - t) * g[i - 1].second + t * g[i].second)};
        }
      throw Error(ErrorCode::DomainEmpty, "graph sample does not cover the requested point");
    }
  }
  return {};
}

std::vector<std::pair<Point, Point>> MonotoneField::graph_sample(int region, double radius, double step) const {
  const auto& reg = regions.at(static_cast<std::size_t>(region));
  std::vector<std::pair<Point, Point>> out;
  if (kind == FieldKind::sampled_graph_1d) {
    const auto& g = reg.graph;
    auto push = [&](double x, double y) {
      if (std::abs(x) <= radius + 1e-12) out.emplace_back(Point::Constant(1, x), Point::Constant(1, y));
    };
    push(g.front().first, g.front().second);
    for (std::size_t i = 1; i < g.size(); ++i) {
      const double dx = g[i].first - g[i - 1].first, dy = g[i].second - g[i - 1].second;
      const int pieces = std::max(1, static_cast<int>(std::ceil(std::max(dx, dy) / step)));
      for (int k = 1; k <= pieces; ++k) {
        const double t = static_cast<double>(k) / pieces;
        push(g[i - 1].first + t * dx, g[i - 1].second + t * dy);
      }
    }
    if (out.empty()) throw Error(ErrorCode::DomainEmpty, "graph sample misses the box");
    return out;
  }
  // Lipschitz bound of beta on the box keeps consecutive images within step.
  double lip = reg.coefficient * std::max(1.0, (p - 1.0) * std::pow(radius, std::max(0.0, p - 2.0)));
  if (kind == FieldKind::potential_plus_skew) lip += reg.gamma.cwiseAbs().sum();
  const int cap = dim == 1 ? 20001 : 129;
  int samples = static_cast<int>(std::ceil(2.0 * radius * std::max(1.0, lip) / step)) + 1;
  samples = std::min(cap, samples | 1);
  const Index total = int_pow(samples, dim);
  out.reserve(static_cast<std::size_t>(total));
  for (Index i = 0; i < total; ++i) {
    const Point xi = grid_point(dim, radius, samples, i);
    for (const auto& eta : image(region, xi)) out.emplace_back(xi, eta);
  }
  return out;
}

MonotoneField two_phase_field(FieldKind kind, int dim, double p, double first, double second,
                              std::optional<Growth> growth) {
  MonotoneField f;
  f.kind = kind;
  f.dim = dim;
  f.p = p;
  f.growth = growth;
  for (int k = 0; k < 2; ++k) {
    FieldRegion r;
    r.box.lo = Point::Zero(dim);
    r.box.hi = Point::Ones(dim);
    r.box.lo[0] = 0.5 * k;
    r.box.hi[0] = 0.5 * (k + 1);
    r.coefficient = k == 0 ? first : second;
    r.drift = Point::Zero(dim);
    r.gamma = SmallMatrix::Zero(dim, dim);
    f.regions.push_back(r);
  }
  f.validate();
  return f;
}

GapReport verify_growth(const MonotoneField& beta, int samples, double radius, double tol) {
  beta.validate();
  if (!beta.growth) throw Error(ErrorCode::InvalidParameter, "field has no growth record");
  if (samples < 2) throw Error(ErrorCode::InvalidParameter, "growth scan needs at least two samples per axis");
  const Growth& g = *beta.growth;
  const double p = g.p, q = g.q();
  GapReport report;
  report.tolerance_used = tol;
  report.max_gap = 0.0;
  report.argmax_point = Point::Zero(beta.dim);
  double worst = -kInfinity;
  int worst_region = -1;
  Point worst_xi, worst_eta;
  const Index total = int_pow(samples, beta.dim);
  for (int r = 0; r < static_cast<int>(beta.regions.size()); ++r)
    for (Index i = 0; i < total; ++i) {
      const Point xi = grid_point(beta.dim, radius, samples, i);
      for (const auto& eta : beta.image(r, xi)) {
        ++report.nodes_checked;
        const double lhs = xi.dot(eta);
        const double rhs = std::max(g.c1 * std::pow(xi.norm(), p) / p - g.m1, g.c2 * std::pow(eta.norm(), q) / q - g.m2);
        const double violation = rhs - lhs;
        if (violation > worst) {
          worst = violation;
          worst_region = r;
          worst_xi = xi;
          worst_eta = eta;
        }
      }
    }
  report.max_gap = std::max(0.0, worst);
  report.argmax_point = worst_xi;
  if (worst > tol)
    throw GrowthViolationError("growth bound violated by " + std::to_string(worst) + " in region " +
                                   std::to_string(worst_region) + " at xi[0]=" + std::to_string(worst_xi[0]),
                               worst_region, Eigen::VectorXd(worst_xi), Eigen::VectorXd(worst_eta), worst);
  return report;
}

TabulatedFunction fitzpatrick(const MonotoneField& beta, int region, const BoxGrid& a_grid, const BoxGrid& b_grid) {
  beta.validate();
  if (a_grid.dim != beta.dim || b_grid.dim != beta.dim)
    throw Error(ErrorCode::GridMismatch, "Fitzpatrick grid dimension does not match the field");
  const double step = std::min(a_grid.spacing(), b_grid.spacing());
  const auto pairs = beta.graph_sample(region, a_grid.radius, step);
  if (pairs.empty()) throw Error(ErrorCode::DomainEmpty, "empty graph sample");
  // N(a,b) = max_j <b, xi_j> + <a, eta_j> - <xi_j, eta_j>.
  const int n = beta.dim;
  const Index m = static_cast<Index>(pairs.size());
  Eigen::MatrixXd xi(n, m), eta(n, m);
  Eigen::VectorXd offset(m);
  for (Index j = 0; j < m; ++j) {
    xi.col(j) = pairs[static_cast<std::size_t>(j)].first;
    eta.col(j) = pairs[static_cast<std::size_t>(j)].second;
    offset[j] = xi.col(j).dot(eta.col(j));
  }
  return TabulatedFunction::sample({a_grid, b_grid}, [&](const Point& z) {
    const Eigen::VectorXd a = z.head(n), b = z.segment(n, n);
    const Eigen::VectorXd affine = xi.transpose() * b + eta.transpose() * a - offset;
    return affine.maxCoeff();
  });
}

SelfdualTables selfdualize_tables(const MonotoneField& beta, const SelfdualizeOptions& options) {
  beta.validate();
  const int n = beta.dim;
  const double p = beta.p, q = beta.q();
  SelfdualTables out;
  for (int r = 0; r < static_cast<int>(beta.regions.size()); ++r) {
    double b_radius = options.b_radius;
    if (b_radius <= 0.0) {
      b_radius = options.radius;
      for (const auto& pr : beta.graph_sample(r, options.radius, options.radius / 8))
        b_radius = std::max(b_radius, pr.second.lpNorm<Eigen::Infinity>());
    }
    const BoxGrid A(n, options.radius, options.points_per_axis);
    const BoxGrid B(n, b_radius, options.points_per_axis);
    TabulatedFunction N = fitzpatrick(beta, r, A, B);
    // N*(p, q) with p paired to a (on the B box) and q paired to b (on the A box).
    const ConjugateTable Nstar = conjugate(N, {B, A});

    TabulatedFunction L = TabulatedFunction::sample({A, B}, [](const Point&) { return 0.0; });
    const int axes = 2 * n;
    const int np = options.points_per_axis;
    const int center = (np - 1) / 2;
    std::vector<double> spacing(static_cast<std::size_t>(axes));
    for (int k = 0; k < axes; ++k) spacing[static_cast<std::size_t>(k)] = L.axis_spacing(k);
    // The swap (a,b) -> (b,a) maps axis k of L to axis (k + n) mod 2n of N*.
    std::vector<Index> swap_stride(static_cast<std::size_t>(axes));
    for (int k = 0; k < axes; ++k) swap_stride[static_cast<std::size_t>(k)] = Nstar.table.stride((k + n) % axes);

    const Index offsets = int_pow(np, axes);
    // Penalty per offset node, split into its a and b parts.
    Eigen::VectorXd penalty(offsets);
    for (Index w = 0; w < offsets; ++w) {
      double wa2 = 0.0, wb2 = 0.0;
      for (int k = 0; k < axes; ++k) {
        const double wk = (L.axis_index(w, k) - center) * spacing[static_cast<std::size_t>(k)];
        (k < n ? wa2 : wb2) += wk * wk;
      }
      penalty[w] = std::pow(2.0, p) * std::pow(std::sqrt(wa2), p) / (4.0 * p) +
                   std::pow(2.0, q) * std::pow(std::sqrt(wb2), q) / (4.0 * q);
    }
    std::vector<int> reach(static_cast<std::size_t>(axes)), off(static_cast<std::size_t>(axes));
    for (Index z = 0; z < L.size(); ++z) {
      Index plus = 0, minus = 0, w = 0;
      for (int k = 0; k < axes; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        const int i = L.axis_index(z, k);
        reach[ku] = std::min(i, np - 1 - i);
        off[ku] = -reach[ku];
        plus += (i + off[ku]) * L.stride(k);
        minus += (i - off[ku]) * swap_stride[ku];
        w += (center + off[ku]) * L.stride(k);
      }
      double best = kInfinity;
      // Odometer over the offsets that keep z + w and z - w inside the box.
      while (true) {
        const double v = 0.5 * N[plus] + 0.5 * Nstar.table[minus] + penalty[w];
        if (v < best) best = v;
        int k = axes - 1;
        for (; k >= 0; --k) {
          const auto ku = static_cast<std::size_t>(k);
          if (off[ku] < reach[ku]) {
            ++off[ku];
            plus += L.stride(k);
            minus -= swap_stride[ku];
            w += L.stride(k);
            break;
          }
          const int span = 2 * reach[ku];
          off[ku] = -reach[ku];
          plus -= span * L.stride(k);
          minus += span * swap_stride[ku];
          w -= span * L.stride(k);
        }
        if (k < 0) break;
      }
      L.values()[z] = best;
    }
    GapOptions gap;
    gap.tol_gap = options.tol_gap + options.gap_slope * L.max_spacing();
    gap.tol_convexity = gap.tol_gap;
    out.gaps.push_back(selfdual_gap_check(L, gap));
    out.lagrangian.push_back(std::move(L));
    out.fitzpatrick.push_back(std::move(N));
    out.fitzpatrick_dual.push_back(Nstar.table);
  }
  return out;
}

OmegaLagrangian selfdualize(const MonotoneField& beta, const SelfdualizeOptions& options) {
  SelfdualTables tables = selfdualize_tables(beta, options);
  std::vector<CellBox> boxes;
  std::vector<RegionPtr> regions;
  for (std::size_t r = 0; r < tables.lagrangian.size(); ++r) {
    if (!tables.gaps[r].passed())
      throw Error(ErrorCode::SelfdualizationFailed,
                  "region " + std::to_string(r) + " selfdual gap " + std::to_string(tables.gaps[r].max_gap) +
                      " exceeds " + std::to_string(tables.gaps[r].tolerance_used));
    boxes.push_back(beta.regions[r].box);
    regions.push_back(std::make_shared<TableLagrangian>(tables.lagrangian[r]));
  }
  OmegaLagrangian L(beta.dim, std::move(boxes), std::move(regions));
  const BoxGrid& A = tables.lagrangian.front().factor(0);
  const BoxGrid& B = tables.lagrangian.front().factor(1);
  const BoxGrid a_probe(beta.dim, A.radius, std::min(A.points_per_axis, 33));
  const BoxGrid b_probe(beta.dim, B.radius, std::min(B.points_per_axis, 33));
  try {
    L.set_growth(estimate_growth(L, beta.p, a_probe, b_probe));
  } catch (const Error&) {
    // Fields without coercive tables keep an empty growth record.
  }
  return L;
}

TabulatedFunction potential_table(const TabulatedFunction& phi, const SmallMatrix& gamma, const BoxGrid& b_grid) {
  if (phi.arity() != 1) throw Error(ErrorCode::InvalidParameter, "phi must be a one-argument table");
  const BoxGrid& A = phi.factor(0);
  const int n = A.dim;
  if (gamma.rows() != n || gamma.cols() != n || b_grid.dim != n)
    throw Error(ErrorCode::GridMismatch, "gamma or b grid does not match phi");
  if (!is_skew(gamma)) throw Error(ErrorCode::InvalidParameter, "gamma must satisfy gamma^T = -gamma");
  double gnorm = 0.0;
  for (int i = 0; i < n; ++i) gnorm = std::max(gnorm, gamma.row(i).cwiseAbs().sum());
  const double y_radius = b_grid.radius + gnorm * A.radius;
  const int y_points = 2 * static_cast<int>(std::ceil(y_radius / b_grid.spacing() - 1e-9)) + 1;
  const BoxGrid Y(n, b_grid.spacing() * (y_points - 1) / 2.0, y_points);
  const TabulatedFunction phi_star = conjugate(phi, {Y}).table;
  return TabulatedFunction::sample({A, b_grid}, [&](const Point& z) {
    const Point a = z.head(n);
    const Point y = z.segment(n, n) - gamma * a;
    const double fa = phi.at(a);
    if (!is_finite(fa)) return kInfinity;
    return fa + phi_star.at(y);
  });
}

OmegaLagrangian potential_lagrangian(const std::vector<PotentialRegion>& phi, const SmallMatrix& gamma,
                                     const BoxGrid& b_grid) {
  if (phi.empty()) throw Error(ErrorCode::InvalidParameter, "no potential regions");
  std::vector<CellBox> boxes;
  std::vector<RegionPtr> regions;
  for (const auto& r : phi) {
    boxes.push_back(r.box);
    regions.push_back(std::make_shared<TableLagrangian>(potential_table(r.phi, gamma, b_grid)));
  }
  return OmegaLagrangian(b_grid.dim, std::move(boxes), std::move(regions));
}

OmegaLagrangian lagrangian_from_field(const MonotoneField& beta) {
  beta.validate();
  if (beta.kind == FieldKind::sampled_graph_1d)
    throw Error(ErrorCode::InvalidParameter, "sampled graphs have no closed-form potential; use selfdualize");
  const int n = beta.dim;
  const double p = beta.p, q = beta.q();
  std::vector<CellBox> boxes;
  std::vector<RegionPtr> regions;
  bool plain = true;
  LagrangianGrowth g;
  g.p = p;
  g.c0 = kInfinity;
  g.c1 = 0.0;
  for (const auto& r : beta.regions) {
    if (!(r.coefficient > 0.0))
      throw Error(ErrorCode::CoercivityMissing, "a vanishing coefficient has no selfdual potential");
    boxes.push_back(r.box);
    if (beta.kind == FieldKind::potential_plus_skew) {
      regions.push_back(std::make_shared<PotentialLagrangian>(n, r.coefficient, p, r.drift, r.gamma));
      plain = plain && r.drift.cwiseAbs().maxCoeff() == 0.0 && r.gamma.cwiseAbs().maxCoeff() == 0.0;
    } else {
      regions.push_back(std::make_shared<PotentialLagrangian>(n, r.coefficient, p));
    }
    const double ca = r.coefficient / p, cb = std::pow(r.coefficient, 1.0 - q) / q;
    g.c0 = std::min(g.c0, std::min(ca, cb));
    g.c1 = std::max(g.c1, std::max(ca, cb));
  }
  OmegaLagrangian L(n, std::move(boxes), std::move(regions));
  if (plain) {
    L.set_growth(g);
  } else {
    L.set_growth(estimate_growth(L, p, BoxGrid(n, 4.0, 33), BoxGrid(n, 4.0, 33)));
  }
  return L;
}

}  // namespace sdhom
