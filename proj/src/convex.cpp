#include "sdhom/convex.hpp"

#include <algorithm>
#include <cmath>

namespace sdhom {

namespace {

constexpr double kNegInfinity = -kInfinity;

std::vector<int> axis_sizes(const TabulatedFunction& f) {
  std::vector<int> n(static_cast<std::size_t>(f.axes()));
  for (int a = 0; a < f.axes(); ++a) n[static_cast<std::size_t>(a)] = f.axis_points(a);
  return n;
}

Index product(const std::vector<int>& n, int from, int to) {
  Index p = 1;
  for (int a = from; a < to; ++a) p *= n[static_cast<std::size_t>(a)];
  return p;
}

TabulatedFunction empty_like(const std::vector<BoxGrid>& factors) {
  Index n = 1;
  for (const auto& f : factors) n *= f.node_count();
  return TabulatedFunction(factors, Eigen::VectorXd::Zero(n));
}

double dot_prefix(const Point& x, int n, int offset_a, const Point& y, int offset_b) {
  double s = 0.0;
  for (int k = 0; k < n; ++k) s += x[offset_a + k] * y[offset_b + k];
  return s;
}

}  // namespace

ConjugateTable conjugate(const TabulatedFunction& f, const std::vector<BoxGrid>& out) {
  TabulatedFunction shape = empty_like(out);
  const int axes = f.axes();
  if (shape.axes() != axes) throw Error(ErrorCode::GridMismatch, "conjugate output grid has a different axis count");
  if (!f.proper()) throw Error(ErrorCode::DomainEmpty, "conjugate of an everywhere-infinite table");

  std::vector<int> sizes = axis_sizes(f);
  Eigen::VectorXd current(f.size());
  for (Index i = 0; i < f.size(); ++i) current[i] = is_finite(f[i]) ? -f[i] : kNegInfinity;
  std::vector<std::uint8_t> flag(static_cast<std::size_t>(f.size()), 0);

  // The maximum over a product grid decomposes exactly into one axis at a time.
  for (int k = 0; k < axes; ++k) {
    const int n_in = f.axis_points(k);
    const int n_out = shape.axis_points(k);
    const Index outer = product(sizes, 0, k);
    const Index inner = product(sizes, k + 1, axes);
    Eigen::VectorXd next(outer * n_out * inner);
    std::vector<std::uint8_t> next_flag(static_cast<std::size_t>(next.size()), 0);
    std::vector<double> best(static_cast<std::size_t>(inner));
    std::vector<int> arg(static_cast<std::size_t>(inner));
    for (Index o = 0; o < outer; ++o) {
      for (int j = 0; j < n_out; ++j) {
        const double y = shape.axis_coordinate(k, j);
        std::fill(best.begin(), best.end(), kNegInfinity);
        std::fill(arg.begin(), arg.end(), -1);
        for (int i = 0; i < n_in; ++i) {
          const double xy = f.axis_coordinate(k, i) * y;
          const double* src = current.data() + (o * n_in + i) * inner;
          for (Index in = 0; in < inner; ++in) {
            const double v = src[in] + xy;
            if (v > best[static_cast<std::size_t>(in)]) {
              best[static_cast<std::size_t>(in)] = v;
              arg[static_cast<std::size_t>(in)] = i;
            }
          }
        }
        for (Index in = 0; in < inner; ++in) {
          const Index dst = (o * n_out + j) * inner + in;
          next[dst] = best[static_cast<std::size_t>(in)];
          const int i = arg[static_cast<std::size_t>(in)];
          if (i >= 0)
            next_flag[static_cast<std::size_t>(dst)] =
                (i == 0 || i == n_in - 1) || flag[static_cast<std::size_t>((o * n_in + i) * inner + in)];
        }
      }
    }
    current = std::move(next);
    flag = std::move(next_flag);
    sizes[static_cast<std::size_t>(k)] = n_out;
  }

  ConjugateTable result{TabulatedFunction(out, current), std::move(flag), 0};
  for (auto b : result.boundary_argmax) result.boundary_count += b;
  return result;
}

TabulatedFunction legendre_transform(const TabulatedFunction& f, const std::vector<BoxGrid>& out) {
  ConjugateTable c = conjugate(f, out);
  if (c.boundary_count > 0) {
    Index first = 0;
    while (!c.boundary_argmax[static_cast<std::size_t>(first)]) ++first;
    const Point y = c.table.node(first);
    throw Error(ErrorCode::BoxTooSmall, "conjugate maximizer on the box boundary at " +
                                            std::to_string(c.boundary_count) + " output nodes (first at y[0]=" +
                                            std::to_string(y[0]) + ")");
  }
  return std::move(c.table);
}

TabulatedFunction inf_convolution(const TabulatedFunction& f, const TabulatedFunction& g) {
  if (!same_grid(f, g)) throw Error(ErrorCode::GridMismatch, "inf-convolution needs tables on the same grid");
  const int axes = f.axes();
  Eigen::VectorXd out = Eigen::VectorXd::Constant(f.size(), kInfinity);
  std::vector<int> idx_x(static_cast<std::size_t>(axes)), idx_y(static_cast<std::size_t>(axes));
  // The grid is symmetric with the origin at a node, so x - y is a node
  // whenever it lies in the box.
  for (Index y = 0; y < f.size(); ++y) {
    const double fy = f[y];
    if (!is_finite(fy)) continue;
    for (int a = 0; a < axes; ++a) idx_y[static_cast<std::size_t>(a)] = f.axis_index(y, a);
    for (Index x = 0; x < f.size(); ++x) {
      Index z = 0;
      bool inside = true;
      for (int a = 0; a < axes; ++a) {
        const int k = f.axis_index(x, a) - idx_y[static_cast<std::size_t>(a)] + (f.axis_points(a) - 1) / 2;
        if (k < 0 || k >= f.axis_points(a)) {
          inside = false;
          break;
        }
        z += k * f.stride(a);
      }
      if (!inside) continue;
      const double v = fy + g[z];
      if (v < out[x]) out[x] = v;
    }
  }
  return TabulatedFunction(f.factors(), out, f.rule());
}

TabulatedFunction moreau_regularize(const TabulatedFunction& L, double lambda) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidParameter, "regularization parameter must be positive");
  if (!L.proper()) throw Error(ErrorCode::DomainEmpty, "regularization of an everywhere-infinite table");
  const int axes = L.axes();
  const std::vector<int> sizes = axis_sizes(L);
  Eigen::VectorXd current = L.values();
  // Every penalty term is a sum over coordinates, so the minimization runs
  // axis by axis.
  for (int k = 0; k < axes; ++k) {
    const int n = L.axis_points(k);
    const Index outer = product(sizes, 0, k);
    const Index inner = product(sizes, k + 1, axes);
    Eigen::VectorXd next = Eigen::VectorXd::Constant(current.size(), kInfinity);
    for (Index o = 0; o < outer; ++o)
      for (int j = 0; j < n; ++j) {
        const double u = L.axis_coordinate(k, j);
        for (int i = 0; i < n; ++i) {
          const double v = L.axis_coordinate(k, i);
          const double penalty = (u - v) * (u - v) / (2.0 * lambda) + lambda * v * v / 2.0;
          const double* src = current.data() + (o * n + i) * inner;
          double* dst = next.data() + (o * n + j) * inner;
          for (Index in = 0; in < inner; ++in) {
            const double c = src[in] + penalty;
            if (c < dst[in]) dst[in] = c;
          }
        }
      }
    current = std::move(next);
  }
  return TabulatedFunction(L.factors(), current, L.rule());
}

ConvexityScan convexity_scan(const TabulatedFunction& f, double tol) {
  ConvexityScan scan;
  const int axes = f.axes();
  std::vector<std::vector<int>> dirs;
  for (int i = 0; i < axes; ++i) {
    std::vector<int> e(static_cast<std::size_t>(axes), 0);
    e[static_cast<std::size_t>(i)] = 1;
    dirs.push_back(e);
    for (int j = i + 1; j < axes; ++j) {
      auto plus = e, minus = e;
      plus[static_cast<std::size_t>(j)] = 1;
      minus[static_cast<std::size_t>(j)] = -1;
      dirs.push_back(plus);
      dirs.push_back(minus);
    }
  }
  double scale = 0.0;
  for (Index i = 0; i < f.size(); ++i)
    if (is_finite(f[i])) scale = std::max(scale, std::abs(f[i]));
  const double threshold = tol + 1e-12 * scale;
  for (Index x = 0; x < f.size(); ++x) {
    const double fx = f[x];
    if (!is_finite(fx)) continue;
    for (const auto& d : dirs) {
      Index step = 0;
      bool ok = true;
      for (int a = 0; a < axes && ok; ++a) {
        const int da = d[static_cast<std::size_t>(a)];
        if (da == 0) continue;
        const int k = f.axis_index(x, a);
        if (k - 1 < 0 || k + 1 >= f.axis_points(a)) ok = false;
        step += da * f.stride(a);
      }
      if (!ok) continue;
      const double fp = f[x + step], fm = f[x - step];
      if (!is_finite(fp) || !is_finite(fm)) continue;
      const double violation = fx - 0.5 * (fp + fm);
      if (violation > scan.worst_violation) {
        scan.worst_violation = violation;
        scan.worst_node = x;
      }
    }
  }
  scan.convex = scan.worst_violation <= threshold;
  return scan;
}

GapReport selfdual_gap_check(const TabulatedFunction& L, const GapOptions& options) {
  if (L.arity() != 2 || L.factor(0).dim != L.factor(1).dim)
    throw Error(ErrorCode::InvalidParameter, "selfdual gap check needs a two-argument table L(a,b)");
  if (options.require_convex) {
    const ConvexityScan scan = convexity_scan(L, options.tol_convexity);
    if (!scan.convex)
      throw Error(ErrorCode::NotConvex, "midpoint convexity violated by " + std::to_string(scan.worst_violation));
  }
  const int dim = L.factor(0).dim;
  const ConjugateTable conj = conjugate(L, {L.factor(1), L.factor(0)});

  GapReport report;
  report.tolerance_used = options.tol_gap;
  report.argmax_point = L.node(0);
  for (Index i = 0; i < L.size(); ++i) {
    const double value = L[i];
    if (!is_finite(value)) continue;
    Point z = L.node(i);
    report.min_basic_margin = std::min(report.min_basic_margin, value - dot_prefix(z, dim, 0, z, dim));
    if (L.on_boundary(i)) continue;
    // L*(b, a): conjugate axes are ordered (b-axes, a-axes).
    Index j = 0;
    for (int k = 0; k < dim; ++k) {
      j += L.axis_index(i, dim + k) * conj.table.stride(k);
      j += L.axis_index(i, k) * conj.table.stride(dim + k);
    }
    if (conj.boundary_argmax[static_cast<std::size_t>(j)]) continue;
    const double dual = conj.table[j];
    if (!is_finite(dual)) continue;
    ++report.nodes_checked;
    const double gap = std::abs(dual - value);
    if (gap > report.max_gap) {
      report.max_gap = gap;
      report.argmax_point = z;
    }
  }
  return report;
}

GraphImage graph_extract(const TabulatedFunction& L, const Point& a, const GraphOptions& options) {
  if (L.arity() != 2) throw Error(ErrorCode::InvalidParameter, "graph extraction needs a two-argument table");
  const BoxGrid& bgrid = L.factor(1);
  const int dim = bgrid.dim;
  if (a.size() != dim) throw Error(ErrorCode::InvalidParameter, "point dimension does not match table");
  const TabulatedFunction bshape = empty_like({bgrid});

  Eigen::VectorXd gap(bshape.size());
  Point z(2 * dim);
  z.head(dim) = a;
  Index best = -1;
  for (Index j = 0; j < bshape.size(); ++j) {
    const Point b = bshape.node(j);
    z.tail(dim) = b;
    const double v = L.at(z);
    gap[j] = is_finite(v) ? v - a.dot(b) : kInfinity;
    if (is_finite(gap[j]) && (best < 0 || gap[j] < gap[best])) best = j;
  }
  if (best < 0 || gap[best] > options.tol)
    throw Error(ErrorCode::EmptyImage, "no node within the gap tolerance (smallest gap " +
                                           (best < 0 ? std::string("inf") : std::to_string(gap[best])) + ")");

  GraphImage image;
  image.min_gap = gap[best];
  for (Index j = 0; j < bshape.size(); ++j)
    if (is_finite(gap[j]) && gap[j] <= gap[best] + options.flat_tol) image.nodes.push_back(bshape.node(j));

  const double h = bgrid.spacing();
  image.center = bshape.node(best);
  for (int k = 0; k < dim; ++k) {
    const int idx = bshape.axis_index(best, k);
    if (idx == 0 || idx == bgrid.points_per_axis - 1) continue;
    const double gm = gap[best - bshape.stride(k)], g0 = gap[best], gp = gap[best + bshape.stride(k)];
    if (!is_finite(gm) || !is_finite(gp)) continue;
    const double curvature = gm - 2.0 * g0 + gp;
    if (curvature <= 0.0) continue;
    image.center[k] += std::clamp(0.5 * h * (gm - gp) / curvature, -h, h);
  }
  if (image.nodes.size() == 1) {
    image.lo = image.hi = image.center;
  } else {
    image.lo = image.hi = image.nodes.front();
    for (const auto& b : image.nodes) {
      image.lo = image.lo.cwiseMin(b);
      image.hi = image.hi.cwiseMax(b);
    }
    image.center = 0.5 * (image.lo + image.hi);
  }
  return image;
}

Point prox(const TabulatedFunction& f, const Point& x, double step) {
  if (!(step > 0.0)) throw Error(ErrorCode::InvalidParameter, "prox step must be positive");
  if (x.size() != f.axes()) throw Error(ErrorCode::InvalidParameter, "point dimension does not match table");
  Eigen::VectorXd objective(f.size());
  Index best = -1;
  for (Index i = 0; i < f.size(); ++i) {
    if (!is_finite(f[i])) {
      objective[i] = kInfinity;
      continue;
    }
    objective[i] = f[i] + (f.node(i) - x).squaredNorm() / (2.0 * step);
    if (best < 0 || objective[i] < objective[best]) best = i;
  }
  if (best < 0) throw Error(ErrorCode::DomainEmpty, "prox of an everywhere-infinite table");
  Point y = f.node(best);
  for (int a = 0; a < f.axes(); ++a) {
    const int k = f.axis_index(best, a);
    if (k == 0 || k == f.axis_points(a) - 1) continue;
    const double om = objective[best - f.stride(a)], o0 = objective[best], op = objective[best + f.stride(a)];
    if (!is_finite(om) || !is_finite(op)) continue;
    const double curvature = om - 2.0 * o0 + op;
    if (curvature <= 0.0) continue;
    const double h = f.axis_spacing(a);
    y[a] += std::clamp(0.5 * h * (om - op) / curvature, -h, h);
  }
  return y;
}

TabulatedFunction convex_envelope(const TabulatedFunction& f) {
  const ConjugateTable star = conjugate(f, f.factors());
  ConjugateTable twice = conjugate(star.table, f.factors());
  return TabulatedFunction(f.factors(), twice.table.values(), Interpolation::lower_convex_envelope);
}

}  // namespace sdhom
