#include "sdhom/grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace sdhom {

BoxGrid::BoxGrid(int dim, double radius, int points_per_axis)
    : dim(dim), radius(radius), points_per_axis(points_per_axis) {
  if (dim < 1 || dim > 4) throw Error(ErrorCode::InvalidParameter, "box grid dimension must be in [1, 4]");
  if (!(radius > 0.0)) throw Error(ErrorCode::InvalidParameter, "box grid radius must be positive");
  if (points_per_axis < 3 || points_per_axis % 2 == 0)
    throw Error(ErrorCode::InvalidParameter, "points_per_axis must be odd and >= 3");
}

Index BoxGrid::node_count() const {
  Index n = 1;
  for (int d = 0; d < dim; ++d) n *= points_per_axis;
  return n;
}

TabulatedFunction::TabulatedFunction(std::vector<BoxGrid> factors, Eigen::VectorXd values,
                                     Interpolation rule)
    : factors_(std::move(factors)), values_(std::move(values)), rule_(rule) {
  if (factors_.empty()) throw Error(ErrorCode::InvalidParameter, "table needs at least one factor");
  for (const auto& f : factors_)
    for (int d = 0; d < f.dim; ++d) {
      axis_points_.push_back(f.points_per_axis);
      axis_radius_.push_back(f.radius);
    }
  if (axis_points_.size() > 4) throw Error(ErrorCode::InvalidParameter, "tables are limited to four axes");
  strides_.assign(axis_points_.size(), 1);
  for (int a = static_cast<int>(axis_points_.size()) - 2; a >= 0; --a)
    strides_[static_cast<std::size_t>(a)] =
        strides_[static_cast<std::size_t>(a + 1)] * axis_points_[static_cast<std::size_t>(a + 1)];
  const Index expected = strides_[0] * axis_points_[0];
  if (values_.size() != expected)
    throw Error(ErrorCode::InvalidParameter, "values length " + std::to_string(values_.size()) +
                                                 " does not match node count " + std::to_string(expected));
}

TabulatedFunction TabulatedFunction::sample(std::vector<BoxGrid> factors,
                                            const std::function<double(const Point&)>& fn,
                                            Interpolation rule) {
  Index n = 1;
  for (const auto& f : factors) n *= f.node_count();
  TabulatedFunction t(std::move(factors), Eigen::VectorXd::Zero(n), rule);
  for (Index i = 0; i < n; ++i) t.values_[i] = fn(t.node(i));
  return t;
}

TabulatedFunction TabulatedFunction::with_rule(Interpolation rule) const {
  TabulatedFunction t = *this;
  t.rule_ = rule;
  return t;
}

double TabulatedFunction::max_spacing() const {
  double h = 0.0;
  for (int a = 0; a < axes(); ++a) h = std::max(h, axis_spacing(a));
  return h;
}

Point TabulatedFunction::node(Index i) const {
  Point x(axes());
  for (int a = 0; a < axes(); ++a) x[a] = axis_coordinate(a, axis_index(i, a));
  return x;
}

bool TabulatedFunction::on_boundary(Index i) const {
  for (int a = 0; a < axes(); ++a) {
    const int k = axis_index(i, a);
    if (k == 0 || k == axis_points(a) - 1) return true;
  }
  return false;
}

Index TabulatedFunction::nearest(const Point& x) const {
  Index idx = 0;
  for (int a = 0; a < axes(); ++a) {
    const double t = (x[a] + axis_radius(a)) / axis_spacing(a);
    const int k = std::clamp(static_cast<int>(std::lround(t)), 0, axis_points(a) - 1);
    idx += k * stride(a);
  }
  return idx;
}

bool TabulatedFunction::proper() const {
  for (Index i = 0; i < values_.size(); ++i)
    if (is_finite(values_[i])) return true;
  return false;
}

double TabulatedFunction::at(const Point& x, Point* gradient) const {
  if (x.size() != axes()) throw Error(ErrorCode::InvalidParameter, "point dimension does not match table");
  if (rule_ == Interpolation::cubic) return catmull_rom(x, gradient);
  return multilinear(x, gradient);
}

namespace {

struct AxisStencil {
  int count = 0;
  std::array<int, 4> index{};
  std::array<double, 4> weight{};
  std::array<double, 4> dweight{};

  void add(int i, double w, double dw) {
    for (int k = 0; k < count; ++k)
      if (index[static_cast<std::size_t>(k)] == i) {
        weight[static_cast<std::size_t>(k)] += w;
        dweight[static_cast<std::size_t>(k)] += dw;
        return;
      }
    index[static_cast<std::size_t>(count)] = i;
    weight[static_cast<std::size_t>(count)] = w;
    dweight[static_cast<std::size_t>(count)] = dw;
    ++count;
  }
};

// Locates x on an axis; returns false outside the closed box.
bool locate(double x, double radius, double h, int n, int& cell, double& frac) {
  const double slack = 1e-12 * radius;
  if (x < -radius - slack || x > radius + slack) return false;
  const double t = (x + radius) / h;
  cell = std::clamp(static_cast<int>(std::floor(t)), 0, n - 2);
  frac = std::clamp(t - cell, 0.0, 1.0);
  return true;
}

using Stencils = std::array<AxisStencil, 4>;

template <typename Lookup>
double tensor_eval(int axes, const Stencils& st, const Lookup& value, const std::array<double, 4>& inv_h,
                   Point* gradient) {
  std::array<int, 4> pos{};
  double total = 0.0;
  std::array<double, 4> grad{};
  while (true) {
    Index idx = 0;
    double w = 1.0;
    for (int a = 0; a < axes; ++a) {
      idx += value.stride(a) * st[static_cast<std::size_t>(a)].index[static_cast<std::size_t>(pos[static_cast<std::size_t>(a)])];
      w *= st[static_cast<std::size_t>(a)].weight[static_cast<std::size_t>(pos[static_cast<std::size_t>(a)])];
    }
    const double v = value[idx];
    if (!is_finite(v)) {
      // Any contributing infinite node makes the interpolant infinite.
      bool touches = (w != 0.0);
      if (gradient) touches = true;
      if (touches) return kInfinity;
    } else {
      total += w * v;
      if (gradient) {
        for (int g = 0; g < axes; ++g) {
          double dw = 1.0;
          for (int a = 0; a < axes; ++a) {
            const auto& s = st[static_cast<std::size_t>(a)];
            const auto p = static_cast<std::size_t>(pos[static_cast<std::size_t>(a)]);
            dw *= (a == g) ? s.dweight[p] * inv_h[static_cast<std::size_t>(a)] : s.weight[p];
          }
          grad[static_cast<std::size_t>(g)] += dw * v;
        }
      }
    }
    int a = axes - 1;
    while (a >= 0) {
      if (++pos[static_cast<std::size_t>(a)] < st[static_cast<std::size_t>(a)].count) break;
      pos[static_cast<std::size_t>(a)] = 0;
      --a;
    }
    if (a < 0) break;
  }
  if (gradient) {
    gradient->resize(axes);
    for (int g = 0; g < axes; ++g) (*gradient)[g] = grad[static_cast<std::size_t>(g)];
  }
  return total;
}

}  // namespace

double TabulatedFunction::multilinear(const Point& x, Point* gradient) const {
  Stencils st{};
  std::array<double, 4> inv_h{};
  for (int a = 0; a < axes(); ++a) {
    int cell = 0;
    double s = 0.0;
    if (!locate(x[a], axis_radius(a), axis_spacing(a), axis_points(a), cell, s)) return kInfinity;
    auto& ax = st[static_cast<std::size_t>(a)];
    ax.add(cell, 1.0 - s, -1.0);
    ax.add(cell + 1, s, 1.0);
    inv_h[static_cast<std::size_t>(a)] = 1.0 / axis_spacing(a);
  }
  return tensor_eval(axes(), st, *this, inv_h, gradient);
}

double TabulatedFunction::catmull_rom(const Point& x, Point* gradient) const {
  Stencils st{};
  std::array<double, 4> inv_h{};
  for (int a = 0; a < axes(); ++a) {
    int cell = 0;
    double s = 0.0;
    const int n = axis_points(a);
    if (!locate(x[a], axis_radius(a), axis_spacing(a), n, cell, s)) return kInfinity;
    const double s2 = s * s, s3 = s2 * s;
    const std::array<double, 4> w{(-s3 + 2 * s2 - s) / 2, (3 * s3 - 5 * s2 + 2) / 2, (-3 * s3 + 4 * s2 + s) / 2,
                                  (s3 - s2) / 2};
    const std::array<double, 4> dw{(-3 * s2 + 4 * s - 1) / 2, (9 * s2 - 10 * s) / 2, (-9 * s2 + 8 * s + 1) / 2,
                                   (3 * s2 - 2 * s) / 2};
    auto& ax = st[static_cast<std::size_t>(a)];
    for (int k = 0; k < 4; ++k) {
      const int i = cell - 1 + k;
      const double wk = w[static_cast<std::size_t>(k)], dk = dw[static_cast<std::size_t>(k)];
      // Ghost nodes use quadratic extrapolation so quadratics stay exact.
      if (i < 0) {
        ax.add(0, 3 * wk, 3 * dk);
        ax.add(1, -3 * wk, -3 * dk);
        ax.add(2, wk, dk);
      } else if (i > n - 1) {
        ax.add(n - 1, 3 * wk, 3 * dk);
        ax.add(n - 2, -3 * wk, -3 * dk);
        ax.add(n - 3, wk, dk);
      } else {
        ax.add(i, wk, dk);
      }
    }
    inv_h[static_cast<std::size_t>(a)] = 1.0 / axis_spacing(a);
  }
  const double v = tensor_eval(axes(), st, *this, inv_h, gradient);
  if (!is_finite(v)) return multilinear(x, gradient);
  return v;
}

bool same_grid(const TabulatedFunction& f, const TabulatedFunction& g) { return f.factors() == g.factors(); }

}  // namespace sdhom
