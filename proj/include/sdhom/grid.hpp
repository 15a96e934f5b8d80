#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "sdhom/error.hpp"

namespace sdhom {

using Index = Eigen::Index;

// Small fixed-capacity vector for points of R^N (N <= 2) and of phase space
// R^N x R^N; never allocates.
using Point = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 4, 1>;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

inline bool is_finite(double v) { return v < kInfinity; }

// Symmetric box [-R, R]^dim sampled with an odd number of points per axis,
// so that the origin is a node.
struct BoxGrid {
  int dim = 1;
  double radius = 1.0;
  int points_per_axis = 3;

  BoxGrid() = default;
  BoxGrid(int dim, double radius, int points_per_axis);

  double spacing() const { return 2.0 * radius / (points_per_axis - 1); }
  double coordinate(int k) const { return -radius + k * spacing(); }
  int center() const { return (points_per_axis - 1) / 2; }
  Index node_count() const;

  bool operator==(const BoxGrid& other) const = default;
};

enum class Interpolation : std::uint8_t {
  multilinear,
  // Catmull-Rom tensor interpolation; C^1 and exact on quadratics.
  cubic,
  // Values hold the discrete biconjugate of the sampled data; evaluated
  // multilinearly.
  lower_convex_envelope,
};

// A real function on a product of box grids, stored row-major over the
// flattened axis list (last axis fastest). One factor means f(x), two factors
// mean a Lagrangian L(a, b). +inf marks points outside the effective domain.
class TabulatedFunction {
 public:
  TabulatedFunction() = default;
  TabulatedFunction(std::vector<BoxGrid> factors, Eigen::VectorXd values,
                    Interpolation rule = Interpolation::multilinear);

  static TabulatedFunction sample(std::vector<BoxGrid> factors,
                                  const std::function<double(const Point&)>& fn,
                                  Interpolation rule = Interpolation::multilinear);

  const std::vector<BoxGrid>& factors() const { return factors_; }
  const BoxGrid& factor(int i) const { return factors_[static_cast<std::size_t>(i)]; }
  int arity() const { return static_cast<int>(factors_.size()); }
  int axes() const { return static_cast<int>(axis_points_.size()); }
  Index size() const { return values_.size(); }

  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }
  double operator[](Index i) const { return values_[i]; }

  Interpolation rule() const { return rule_; }
  TabulatedFunction with_rule(Interpolation rule) const;

  int axis_points(int axis) const { return axis_points_[static_cast<std::size_t>(axis)]; }
  double axis_radius(int axis) const { return axis_radius_[static_cast<std::size_t>(axis)]; }
  double axis_spacing(int axis) const {
    return 2.0 * axis_radius(axis) / (axis_points(axis) - 1);
  }
  Index stride(int axis) const { return strides_[static_cast<std::size_t>(axis)]; }
  double axis_coordinate(int axis, int k) const { return -axis_radius(axis) + k * axis_spacing(axis); }
  // Largest spacing over all axes.
  double max_spacing() const;

  int axis_index(Index node, int axis) const {
    return static_cast<int>((node / stride(axis)) % axis_points(axis));
  }
  Point node(Index i) const;
  bool on_boundary(Index i) const;

  // Node nearest to x (clamped to the box).
  Index nearest(const Point& x) const;

  // Interpolated value, +inf outside the box. `gradient` may be null.
  double at(const Point& x, Point* gradient = nullptr) const;

  // True when every finite value is below +inf and the table is not all +inf.
  bool proper() const;

 private:
  std::vector<BoxGrid> factors_;
  Eigen::VectorXd values_;
  Interpolation rule_ = Interpolation::multilinear;
  std::vector<int> axis_points_;
  std::vector<double> axis_radius_;
  std::vector<Index> strides_;

  double multilinear(const Point& x, Point* gradient) const;
  double catmull_rom(const Point& x, Point* gradient) const;
};

bool same_grid(const TabulatedFunction& f, const TabulatedFunction& g);

}  // namespace sdhom
