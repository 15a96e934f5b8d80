#include "sdhom/lagrangian.hpp"

#include <algorithm>
#include <cmath>

namespace sdhom {

namespace {

// c |y|^r / r and its gradient, with a fast path for r = 2.
double power_term(const Point& y, double c, double r, Point* grad) {
  const double n2 = y.squaredNorm();
  if (r == 2.0) {
    if (grad) *grad = c * y;
    return 0.5 * c * n2;
  }
  const double n = std::sqrt(n2);
  if (n == 0.0) {
    if (grad) *grad = Point::Zero(y.size());
    return 0.0;
  }
  const double nr1 = std::pow(n, r - 1.0);
  if (grad) *grad = (c * nr1 / n) * y;
  return c * nr1 * n / r;
}

class ConstantShift final : public RegionLagrangian {
 public:
  ConstantShift(RegionPtr base, double shift) : base_(std::move(base)), shift_(shift) {}

  int dim() const override { return base_->dim(); }
  double value(const Point& a, const Point& b, Point* ga, Point* gb) const override {
    return base_->value(a, b, ga, gb) + shift_;
  }
  double conjugate(const Point& p, const Point& q, Point* gp, Point* gq) const override {
    return base_->conjugate(p, q, gp, gq) - shift_;
  }
  bool smooth() const override { return base_->smooth(); }
  std::shared_ptr<const RegionLagrangian> smoothed(double lambda) const override {
    return std::make_shared<ConstantShift>(base_->smoothed(lambda), shift_);
  }

 private:
  RegionPtr base_;
  double shift_;
};

double reduce_unit(double x) {
  double r = x - std::floor(x);
  if (r >= 1.0) r = 0.0;
  return r;
}

}  // namespace

std::shared_ptr<const RegionLagrangian> RegionLagrangian::smoothed(double) const {
  throw Error(ErrorCode::InvalidParameter, "this Lagrangian has no smoothed form");
}

TabulatedFunction RegionLagrangian::tabulate(const BoxGrid& a_grid, const BoxGrid& b_grid) const {
  if (a_grid.dim != dim() || b_grid.dim != dim())
    throw Error(ErrorCode::GridMismatch, "tabulation grid dimension does not match the Lagrangian");
  const int n = dim();
  return TabulatedFunction::sample({a_grid, b_grid}, [&](const Point& z) {
    return value(z.head(n), z.segment(n, n), nullptr, nullptr);
  });
}

PotentialLagrangian::PotentialLagrangian(int dim, double c, double p)
    : PotentialLagrangian(dim, c, p, Point::Zero(dim), SmallMatrix::Zero(dim, dim)) {}

PotentialLagrangian::PotentialLagrangian(int dim, double c, double p, Point d, SmallMatrix gamma)
    : dim_(dim), c_(c), p_(p), q_(p / (p - 1.0)), d_(std::move(d)), gamma_(std::move(gamma)) {
  if (dim < 1 || dim > 2) throw Error(ErrorCode::InvalidParameter, "potential Lagrangians support N = 1, 2");
  if (!(c > 0.0)) throw Error(ErrorCode::InvalidParameter, "potential coefficient must be positive");
  if (!(p > 1.0)) throw Error(ErrorCode::InvalidParameter, "exponent p must exceed 1");
  if (d_.size() != dim || gamma_.rows() != dim || gamma_.cols() != dim)
    throw Error(ErrorCode::InvalidParameter, "drift or skew part has the wrong size");
  if ((gamma_ + gamma_.transpose()).cwiseAbs().maxCoeff() != 0.0)
    throw Error(ErrorCode::InvalidParameter, "Gamma must satisfy Gamma + Gamma^T = 0");
  has_gamma_ = gamma_.cwiseAbs().maxCoeff() > 0.0;
}

double PotentialLagrangian::phi(const Point& a, Point* grad) const {
  double v = power_term(a, c_, p_, grad) + d_.dot(a);
  if (grad) *grad += d_;
  return v;
}

double PotentialLagrangian::phi_star(const Point& y, Point* grad) const {
  const Point shifted = y - d_;
  return power_term(shifted, std::pow(c_, 1.0 - q_), q_, grad);
}

double PotentialLagrangian::value(const Point& a, const Point& b, Point* grad_a, Point* grad_b) const {
  Point y = b;
  if (has_gamma_) y.noalias() -= gamma_ * a;
  Point gy;
  const double v = phi(a, grad_a) + phi_star(y, (grad_a || grad_b) ? &gy : nullptr);
  if (grad_a && has_gamma_) grad_a->noalias() -= gamma_.transpose() * gy;
  if (grad_b) *grad_b = gy;
  return v;
}

double PotentialLagrangian::conjugate(const Point& p, const Point& q, Point* grad_p, Point* grad_q) const {
  // Selfduality: L*(p, q) = L(q, p).
  return value(q, p, grad_q, grad_p);
}

TableLagrangian::TableLagrangian(TabulatedFunction table) : table_(std::move(table)) {
  if (table_.arity() != 2 || table_.factor(0).dim != table_.factor(1).dim)
    throw Error(ErrorCode::InvalidParameter, "a table Lagrangian needs two factors of equal dimension");
  const ConjugateTable c = sdhom::conjugate(table_, {table_.factor(1), table_.factor(0)});
  conjugate_ = TabulatedFunction(c.table.factors(), c.table.values(), table_.rule());
}

double TableLagrangian::value(const Point& a, const Point& b, Point* grad_a, Point* grad_b) const {
  const int n = dim();
  Point z(2 * n);
  z << a, b;
  if (!grad_a && !grad_b) return table_.at(z);
  Point g;
  const double v = table_.at(z, &g);
  if (grad_a) *grad_a = g.head(n);
  if (grad_b) *grad_b = g.segment(n, n);
  return v;
}

double TableLagrangian::conjugate(const Point& p, const Point& q, Point* grad_p, Point* grad_q) const {
  const int n = dim();
  Point z(2 * n);
  z << p, q;
  if (!grad_p && !grad_q) return conjugate_.at(z);
  Point g;
  const double v = conjugate_.at(z, &g);
  if (grad_p) *grad_p = g.head(n);
  if (grad_q) *grad_q = g.segment(n, n);
  return v;
}

std::shared_ptr<const RegionLagrangian> TableLagrangian::smoothed(double lambda) const {
  return std::make_shared<TableLagrangian>(moreau_regularize(table_, lambda).with_rule(Interpolation::cubic));
}

double LagrangianGrowth::lower(const Point& a, const Point& b) const {
  return c0 * (std::pow(a.norm(), p) + std::pow(b.norm(), q()) - n0);
}

double LagrangianGrowth::upper(const Point& a, const Point& b) const {
  return c1 * (std::pow(a.norm(), p) + std::pow(b.norm(), q()) + n1);
}

bool CellBox::contains(const Point& x) const {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x[i] < lo[i] || x[i] >= hi[i]) return false;
  return true;
}

OmegaLagrangian::OmegaLagrangian(int dim, std::vector<CellBox> boxes, std::vector<RegionPtr> regions,
                                 std::optional<LagrangianGrowth> growth)
    : dim_(dim), boxes_(std::move(boxes)), regions_(std::move(regions)), growth_(growth) {
  if (regions_.empty()) throw Error(ErrorCode::InvalidParameter, "a Lagrangian field needs at least one region");
  if (boxes_.size() != regions_.size())
    throw Error(ErrorCode::InvalidParameter, "every region needs exactly one cell box");
  for (std::size_t r = 0; r < regions_.size(); ++r) {
    if (!regions_[r] || regions_[r]->dim() != dim)
      throw Error(ErrorCode::InvalidParameter, "region " + std::to_string(r) + " has the wrong dimension");
    if (boxes_[r].lo.size() != dim || boxes_[r].hi.size() != dim)
      throw Error(ErrorCode::InvalidParameter, "cell box " + std::to_string(r) + " has the wrong dimension");
  }
}

OmegaLagrangian OmegaLagrangian::uniform(RegionPtr region, std::optional<LagrangianGrowth> growth) {
  const int n = region->dim();
  CellBox box{Point::Zero(n), Point::Ones(n)};
  return OmegaLagrangian(n, {box}, {std::move(region)}, growth);
}

int OmegaLagrangian::region_at(const Point& x) const {
  Point y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = reduce_unit(x[i]);
  for (std::size_t r = 0; r < boxes_.size(); ++r)
    if (boxes_[r].contains(y)) return static_cast<int>(r);
  throw Error(ErrorCode::DomainEmpty, "point of the unit cell is not covered by any region");
}

bool OmegaLagrangian::smooth() const {
  return std::all_of(regions_.begin(), regions_.end(), [](const RegionPtr& r) { return r->smooth(); });
}

double OmegaLagrangian::value(const Point& x, const Point& a, const Point& b) const {
  return region(region_at(x)).value(a, b, nullptr, nullptr);
}

OmegaLagrangian OmegaLagrangian::plus_constant(double c) const {
  std::vector<RegionPtr> shifted;
  for (const auto& r : regions_) shifted.push_back(std::make_shared<ConstantShift>(r, c));
  return OmegaLagrangian(dim_, boxes_, std::move(shifted), growth_);
}

SampledLagrangian::SampledLagrangian(int dim, std::vector<RegionPtr> regions, std::vector<int> region_of)
    : dim_(dim), regions_(std::move(regions)), region_of_(std::move(region_of)) {
  for (int r : region_of_)
    if (r < 0 || r >= static_cast<int>(regions_.size()))
      throw Error(ErrorCode::InvalidParameter, "sample refers to a missing region");
}

SampledLagrangian SampledLagrangian::sample(const OmegaLagrangian& L, const Eigen::MatrixXd& points) {
  if (points.rows() != L.dim()) throw Error(ErrorCode::GridMismatch, "sample points have the wrong dimension");
  std::vector<RegionPtr> regions;
  for (int r = 0; r < L.region_count(); ++r) regions.push_back(L.region_ptr(r));
  std::vector<int> region_of(static_cast<std::size_t>(points.cols()));
  for (Eigen::Index k = 0; k < points.cols(); ++k)
    region_of[static_cast<std::size_t>(k)] = L.region_at(points.col(k));
  return SampledLagrangian(L.dim(), std::move(regions), std::move(region_of));
}

double SampledLagrangian::value(Eigen::Index k, const Point& a, const Point& b, Point* grad_a,
                                Point* grad_b) const {
  if (shifts_.size() == 0) return region(k).value(a, b, grad_a, grad_b);
  const Point s = shifts_.col(k);
  const double v = region(k).value(a, b + s, grad_a, grad_b) - a.dot(s);
  if (grad_a) *grad_a -= s;
  return v;
}

double SampledLagrangian::conjugate(Eigen::Index k, const Point& p, const Point& q, Point* grad_p,
                                    Point* grad_q) const {
  if (shifts_.size() == 0) return region(k).conjugate(p, q, grad_p, grad_q);
  const Point s = shifts_.col(k);
  const double v = region(k).conjugate(p + s, q, grad_p, grad_q) - s.dot(q);
  if (grad_q) *grad_q -= s;
  return v;
}

bool SampledLagrangian::smooth() const {
  return std::all_of(regions_.begin(), regions_.end(), [](const RegionPtr& r) { return r->smooth(); });
}

SampledLagrangian SampledLagrangian::smoothed(double lambda) const {
  SampledLagrangian out = *this;
  for (auto& r : out.regions_)
    if (!r->smooth()) r = r->smoothed(lambda);
  return out;
}

SampledLagrangian SampledLagrangian::shifted(const Eigen::MatrixXd& shifts) const {
  if (shifts.size() != 0 && (shifts.rows() != dim_ || shifts.cols() != size()))
    throw Error(ErrorCode::GridMismatch, "shift field has the wrong shape");
  SampledLagrangian out = *this;
  out.shifts_ = shifts;
  return out;
}

double SampledLagrangian::total(const Eigen::MatrixXd& A, const Eigen::MatrixXd& F, Eigen::MatrixXd* grad_A,
                                Eigen::MatrixXd* grad_F) const {
  if (grad_A) grad_A->resize(dim_, size());
  if (grad_F) grad_F->resize(dim_, size());
  double sum = 0.0;
  Point ga, gb;
  for (Eigen::Index k = 0; k < size(); ++k) {
    const double v = value(k, A.col(k), F.col(k), grad_A ? &ga : nullptr, grad_F ? &gb : nullptr);
    if (!is_finite(v)) return kInfinity;
    sum += v;
    if (grad_A) grad_A->col(k) = ga;
    if (grad_F) grad_F->col(k) = gb;
  }
  return sum;
}

double SampledLagrangian::total_conjugate(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q,
                                          Eigen::MatrixXd* grad_P, Eigen::MatrixXd* grad_Q) const {
  if (grad_P) grad_P->resize(dim_, size());
  if (grad_Q) grad_Q->resize(dim_, size());
  double sum = 0.0;
  Point gp, gq;
  for (Eigen::Index k = 0; k < size(); ++k) {
    const double v = conjugate(k, P.col(k), Q.col(k), grad_P ? &gp : nullptr, grad_Q ? &gq : nullptr);
    if (!is_finite(v)) return kInfinity;
    sum += v;
    if (grad_P) grad_P->col(k) = gp;
    if (grad_Q) grad_Q->col(k) = gq;
  }
  return sum;
}

LagrangianGrowth estimate_growth(const OmegaLagrangian& L, double p, const BoxGrid& a_grid,
                                 const BoxGrid& b_grid) {
  LagrangianGrowth g;
  g.p = p;
  g.n0 = 1.0;
  g.n1 = 1.0;
  g.c0 = kInfinity;
  g.c1 = 0.0;
  const double q = g.q();
  const int n = L.dim();
  for (int r = 0; r < L.region_count(); ++r) {
    const TabulatedFunction t = L.region(r).tabulate(a_grid, b_grid);
    for (Index i = 0; i < t.size(); ++i) {
      if (!is_finite(t[i])) continue;
      const Point z = t.node(i);
      const double s = std::pow(z.head(n).norm(), p) + std::pow(z.segment(n, n).norm(), q);
      if (s > 1.0) g.c0 = std::min(g.c0, t[i] / (s - 1.0));
      g.c1 = std::max(g.c1, t[i] / (s + 1.0));
    }
  }
  if (!is_finite(g.c0) || g.c0 <= 0.0) throw Error(ErrorCode::CoercivityMissing, "no positive lower growth constant");
  return g;
}

}  // namespace sdhom
