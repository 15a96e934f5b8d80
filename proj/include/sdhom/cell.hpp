#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "sdhom/convex.hpp"
#include "sdhom/fields.hpp"
#include "sdhom/lagrangian.hpp"
#include "sdhom/periodic.hpp"

namespace sdhom {

struct CellOptions {
  int max_iter = 20000;
  // Target RMS of the projected pointwise gradient; 0 picks 1e-6 for p = 2
  // and 1e-4 otherwise.
  double tol = 0.0;
  double p = 2.0;
  // Moreau parameters for Lagrangians without a C^1 form.
  std::vector<double> continuation{1e-1, 1e-2, 1e-3};

  double tolerance() const { return tol > 0.0 ? tol : (p == 2.0 ? 1e-6 : 1e-4); }
};

// phi: zero-mean periodic potential. g: zero-mean divergence-free field.
struct CorrectorPair {
  Eigen::VectorXd phi;
  Eigen::MatrixXd g;
};

struct CellSolution {
  Point a;
  Point b;
  double value = 0.0;
  CorrectorPair corrector;
  // D phi, stored to avoid recomputing it.
  Eigen::MatrixXd gradient;
  double kkt_residual = 0.0;
  int iterations = 0;
};

// The cell problem
//   L_hom(a, b) = min over (phi, g) of mean_Q L(x, a + D phi, b + g)
// and its dual counterpart
//   L_hom*(p, q) = min over (g, phi) of mean_Q L*(x, p + g, q + D phi),
// solved by spectral projected gradient on (D phi, g).
class CellProblem {
 public:
  CellProblem(const OmegaLagrangian& L, const CellGrid& grid, CellOptions options = {});

  const CellGrid& grid() const { return calc_.grid(); }
  const PeriodicCalculus& calculus() const { return calc_; }
  const SampledLagrangian& sampled() const { return sampled_; }
  const CellOptions& options() const { return options_; }
  // Moreau-smoothed copies used by the continuation, coarsest first; empty
  // when L is already C^1.
  const std::vector<SampledLagrangian>& smoothing_stages() const { return smoothed_; }

  CellSolution solve(const Point& a, const Point& b, const CellSolution* warm = nullptr) const;
  CellSolution solve_dual(const Point& p, const Point& q, const CellSolution* warm = nullptr) const;

  // mean_Q L(x, a + V, b + g) for given fields.
  double energy(const Point& a, const Point& b, const Eigen::MatrixXd& V, const Eigen::MatrixXd& g) const;

 private:
  PeriodicCalculus calc_;
  SampledLagrangian sampled_;
  std::vector<SampledLagrangian> smoothed_;
  CellOptions options_;

  CellSolution run(const Point& a, const Point& b, const CellSolution* warm, bool dual) const;
};

CellSolution solve_cell(const OmegaLagrangian& L, const Point& a, const Point& b, const CellGrid& grid,
                        const CellOptions& options = {});

// Sandwich bounds plus the zero-corrector upper bound.
struct BoundsReport {
  Index nodes_checked = 0;
  Index violations = 0;
  // Smallest slack over all inequalities; negative means a violation.
  double worst_margin = kInfinity;
  Point worst_node;
  double tolerance_used = 0.0;
  std::vector<Index> flagged;

  bool passed() const { return violations == 0; }
};

struct HomLagrangian {
  TabulatedFunction table;
  CellGrid cell;
  Eigen::VectorXd residuals;
  Eigen::VectorXi iterations;
  std::optional<LagrangianGrowth> growth;
  GapReport selfdual;
  BoundsReport bounds;
};

struct TabulateOptions {
  CellOptions cell;
  int threads = 0;
  // Gap tolerance is tol_gap + gap_slope * (h + h_cell).
  double tol_gap = 1e-6;
  double gap_slope = 0.1;
  bool run_checks = true;
};

HomLagrangian tabulate_hom(const OmegaLagrangian& L, const BoxGrid& a_grid, const BoxGrid& b_grid,
                           const CellGrid& grid, const TabulateOptions& options = {});

BoundsReport hom_bounds_check(const TabulatedFunction& table, const std::optional<LagrangianGrowth>& growth,
                              const OmegaLagrangian* L = nullptr, const CellGrid* grid = nullptr,
                              double tol = 1e-8);

struct DualCellReport {
  double max_discrepancy = 0.0;
  Point argmax_point;
  Index nodes_compared = 0;
  Index nodes_skipped = 0;
  double coverage = 0.0;
  double tolerance_used = 0.0;
  TabulatedFunction route_i;
  TabulatedFunction route_ii;

  bool passed() const { return nodes_compared > 0 && max_discrepancy <= tolerance_used; }
};

struct DualCheckOptions {
  CellOptions cell;
  // Output box is the input box scaled by this factor.
  double shrink = 0.5;
  // 0 keeps the input node count.
  int points_per_axis = 0;
  int threads = 0;
  double tol = 1e-3;
};

// Route (i): discrete transform of the table. Route (ii): dual cell problem.
DualCellReport dual_cell_check(const OmegaLagrangian& L, const HomLagrangian& hom,
                               const DualCheckOptions& options = {});

struct SubdiffAverage {
  Point da;
  Point db;
  // Hull of averaged one-sided derivatives.
  Point lo;
  Point hi;
  bool set_valued = false;
};

SubdiffAverage subdiff_average(const CellProblem& problem, const CellSolution& solution,
                               double threshold = 1e-3);

struct HomGraph {
  std::vector<Point> xi;
  std::vector<GraphImage> images;

  // Least-squares slope through the origin of the image centers (1D).
  double slope() const;
};

// Images over all a-nodes; throws NonMonotoneGraph when two images pair
// negatively beyond monotone_tol |dxi| (0 uses the b spacing).
HomGraph beta_hom_extract(const TabulatedFunction& table, const GraphOptions& options = {},
                          double monotone_tol = 0.0);

// A convex potential per region: value and gradient.
using PotentialFn = std::function<double(const Point&, Point*)>;

struct OmegaPotential {
  int dim = 1;
  std::vector<CellBox> boxes;
  std::vector<PotentialFn> phi;

  static OmegaPotential from_field(const MonotoneField& beta);
  int region_at(const Point& x) const;
};

struct PsiSolution {
  double value = 0.0;
  Eigen::VectorXd phi;
  double kkt_residual = 0.0;
  int iterations = 0;
};

PsiSolution psi_hom(const OmegaPotential& phi, const Point& a, const CellGrid& grid, const CellOptions& options = {});

}  // namespace sdhom
