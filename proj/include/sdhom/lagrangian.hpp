#pragma once

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "sdhom/convex.hpp"
#include "sdhom/grid.hpp"

namespace sdhom {

using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 2, 2>;

// A selfdual Lagrangian L(a, b) on R^N x R^N, the value of L(x, ., .) on one
// region of the unit cell.
class RegionLagrangian {
 public:
  virtual ~RegionLagrangian() = default;

  virtual int dim() const = 0;
  // L(a, b); gradients are written when the pointers are non-null.
  virtual double value(const Point& a, const Point& b, Point* grad_a = nullptr, Point* grad_b = nullptr) const = 0;
  // L*(p, q) = sup <a,p> + <b,q> - L(a,b).
  virtual double conjugate(const Point& p, const Point& q, Point* grad_p = nullptr,
                           Point* grad_q = nullptr) const = 0;
  // False when gradient methods need a Moreau-smoothed copy.
  virtual bool smooth() const { return true; }
  virtual std::shared_ptr<const RegionLagrangian> smoothed(double lambda) const;

  TabulatedFunction tabulate(const BoxGrid& a_grid, const BoxGrid& b_grid) const;
};

using RegionPtr = std::shared_ptr<const RegionLagrangian>;

// phi(a) = c |a|^p / p + <d, a> and L(a,b) = phi(a) + phi*(b - Gamma a) with
// Gamma skew; the graph is Gamma a + c |a|^{p-2} a + d.
class PotentialLagrangian final : public RegionLagrangian {
 public:
  PotentialLagrangian(int dim, double c, double p);
  PotentialLagrangian(int dim, double c, double p, Point d, SmallMatrix gamma);

  int dim() const override { return dim_; }
  double value(const Point& a, const Point& b, Point* grad_a = nullptr, Point* grad_b = nullptr) const override;
  double conjugate(const Point& p, const Point& q, Point* grad_p = nullptr, Point* grad_q = nullptr) const override;

  double phi(const Point& a, Point* grad = nullptr) const;
  double phi_star(const Point& y, Point* grad = nullptr) const;

  double coefficient() const { return c_; }
  double exponent() const { return p_; }
  const Point& drift() const { return d_; }
  const SmallMatrix& gamma() const { return gamma_; }

 private:
  int dim_;
  double c_;
  double p_;
  double q_;
  Point d_;
  SmallMatrix gamma_;
  bool has_gamma_ = false;
};

// L given by a two-argument table; +inf outside the box. The conjugate is the
// discrete transform on the same grid.
class TableLagrangian final : public RegionLagrangian {
 public:
  explicit TableLagrangian(TabulatedFunction table);

  int dim() const override { return table_.factor(0).dim; }
  double value(const Point& a, const Point& b, Point* grad_a = nullptr, Point* grad_b = nullptr) const override;
  double conjugate(const Point& p, const Point& q, Point* grad_p = nullptr, Point* grad_q = nullptr) const override;
  bool smooth() const override { return table_.rule() == Interpolation::cubic; }
  std::shared_ptr<const RegionLagrangian> smoothed(double lambda) const override;

  const TabulatedFunction& table() const { return table_; }
  const TabulatedFunction& conjugate_table() const { return conjugate_; }

 private:
  TabulatedFunction table_;
  TabulatedFunction conjugate_;
};

// Growth sandwich C0 (|a|^p + |b|^q - n0) <= L(a,b) <= C1 (|a|^p + |b|^q + n1).
struct LagrangianGrowth {
  double c0 = 0.0;
  double c1 = 0.0;
  double p = 2.0;
  double n0 = 0.0;
  double n1 = 0.0;

  double q() const { return p / (p - 1.0); }
  double lower(const Point& a, const Point& b) const;
  double upper(const Point& a, const Point& b) const;
};

// Axis-aligned box of the unit cell, half-open [lo, hi).
struct CellBox {
  Point lo;
  Point hi;

  bool contains(const Point& x) const;
};

// Lagrangian that is piecewise constant in x over boxes of the unit cell and
// extended periodically.
class OmegaLagrangian {
 public:
  OmegaLagrangian() = default;
  OmegaLagrangian(int dim, std::vector<CellBox> boxes, std::vector<RegionPtr> regions,
                  std::optional<LagrangianGrowth> growth = std::nullopt);

  static OmegaLagrangian uniform(RegionPtr region, std::optional<LagrangianGrowth> growth = std::nullopt);

  int dim() const { return dim_; }
  int region_count() const { return static_cast<int>(regions_.size()); }
  const RegionLagrangian& region(int r) const { return *regions_[static_cast<std::size_t>(r)]; }
  const RegionPtr& region_ptr(int r) const { return regions_[static_cast<std::size_t>(r)]; }
  const CellBox& box(int r) const { return boxes_[static_cast<std::size_t>(r)]; }
  const std::optional<LagrangianGrowth>& growth() const { return growth_; }
  void set_growth(std::optional<LagrangianGrowth> growth) { growth_ = growth; }

  // Region containing x mod 1 (first match).
  int region_at(const Point& x) const;
  bool smooth() const;
  bool x_independent() const { return regions_.size() == 1; }

  // Pointwise values; x is reduced mod 1.
  double value(const Point& x, const Point& a, const Point& b) const;

  // L + c for a constant c.
  OmegaLagrangian plus_constant(double c) const;

 private:
  int dim_ = 1;
  std::vector<CellBox> boxes_;
  std::vector<RegionPtr> regions_;
  std::optional<LagrangianGrowth> growth_;
};

// A Lagrangian sampled at a list of quadrature points: point k uses region
// r(k) and, optionally, a flux shift s(k) giving
//   L_k(a, b) = L_r(a, b + s) - <a, s>,
// which is again selfdual.
class SampledLagrangian {
 public:
  SampledLagrangian() = default;
  SampledLagrangian(int dim, std::vector<RegionPtr> regions, std::vector<int> region_of);

  // Points are given column-wise; coordinates are reduced mod 1 before lookup.
  static SampledLagrangian sample(const OmegaLagrangian& L, const Eigen::MatrixXd& points);

  int dim() const { return dim_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(region_of_.size()); }
  int region_of(Eigen::Index k) const { return region_of_[static_cast<std::size_t>(k)]; }
  const RegionLagrangian& region(Eigen::Index k) const {
    return *regions_[static_cast<std::size_t>(region_of(k))];
  }

  double value(Eigen::Index k, const Point& a, const Point& b, Point* grad_a = nullptr,
               Point* grad_b = nullptr) const;
  double conjugate(Eigen::Index k, const Point& p, const Point& q, Point* grad_p = nullptr,
                   Point* grad_q = nullptr) const;

  bool smooth() const;
  SampledLagrangian smoothed(double lambda) const;
  // Per-point shifts (dim x size); an empty matrix clears them.
  SampledLagrangian shifted(const Eigen::MatrixXd& shifts) const;
  const Eigen::MatrixXd& shifts() const { return shifts_; }

  // Sum over points of L_k(A_k, F_k) with fields stored dim x size.
  double total(const Eigen::MatrixXd& A, const Eigen::MatrixXd& F, Eigen::MatrixXd* grad_A = nullptr,
               Eigen::MatrixXd* grad_F = nullptr) const;
  double total_conjugate(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q, Eigen::MatrixXd* grad_P = nullptr,
                         Eigen::MatrixXd* grad_Q = nullptr) const;

 private:
  int dim_ = 1;
  std::vector<RegionPtr> regions_;
  std::vector<int> region_of_;
  Eigen::MatrixXd shifts_;
};

// Smallest C0 and largest C1 for which the sandwich holds with n0 = n1 = 1 on
// the nodes of an (a, b) box.
LagrangianGrowth estimate_growth(const OmegaLagrangian& L, double p, const BoxGrid& a_grid,
                                 const BoxGrid& b_grid);

}  // namespace sdhom
