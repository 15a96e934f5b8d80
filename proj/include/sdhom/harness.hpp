#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sdhom/cell.hpp"
#include "sdhom/dirichlet.hpp"

namespace sdhom {

// Source terms u* written as "const:c" or "sin:c" (c sin(pi x), or the
// product over axes in 2D).
struct Source {
  enum class Kind { constant, sine };
  Kind kind = Kind::constant;
  double scale = 1.0;

  static Source parse(const std::string& text);
  std::string str() const;
  Eigen::VectorXd evaluate(const DirichletMesh& mesh) const;
};

// Commensurate scales eps = 1/n and a fixed mesh with `elements` intervals
// per axis, so every period holds elements * eps cells.
struct EpsSchedule {
  std::vector<int> inverse_eps{4, 8, 16, 32, 64};
  int elements = 1024;
  int dim = 1;

  void validate() const;
  double eps(std::size_t i) const { return 1.0 / inverse_eps[i]; }
  int cells_per_period(std::size_t i) const { return elements / inverse_eps[i]; }
  DirichletMesh mesh() const { return DirichletMesh(dim, elements - 1); }
};

// Least-squares slope of log(values) against log(eps) over the last
// `tail` entries (all entries when tail <= 0).
double fit_rate(const std::vector<double>& eps, const std::vector<double>& values, int tail = 3);

// Weak pairings against a fixed dictionary of smooth vector fields and the
// strong H^-1 surrogate of the divergence mismatch.
struct TTopologyMeter {
  std::vector<double> weak;
  double strong = 0.0;

  double weak_max() const;
};

// Eight smooth test fields sampled at element centroids.
std::vector<Eigen::MatrixXd> flux_dictionary(const DirichletMesh& mesh);
TTopologyMeter measure_flux(const DirichletOperators& ops, const Eigen::MatrixXd& tau, const Eigen::MatrixXd& limit);

// L_hom as a Lagrangian field: the table with the cubic rule, x-independent.
OmegaLagrangian hom_field(const HomLagrangian& hom);

struct SweepRecord {
  double eps = 0.0;
  bool ok = false;
  std::string error;
  double gap = 0.0;
  double err_u = 0.0;
  TTopologyMeter flux;
  double div_residual = 0.0;
  double rate_running = 0.0;
  SolverReport solution;
};

struct SweepReport {
  SolverReport hom;
  std::vector<SweepRecord> records;
  double rate_u = 0.0;
  double rate_flux = 0.0;
  double u_hom_max = 0.0;
  bool all_certified = false;
};

struct SweepOptions {
  DirichletOptions solve;
  // Exponent of the L^p error norm.
  double p = 2.0;
  int threads = 1;
};

SweepReport eps_sweep(const OmegaLagrangian& L, const HomLagrangian& hom, const Source& source,
                      const EpsSchedule& schedule, const SweepOptions& options = {});

// Cell solutions at the (Du, tau) value of every element of a homogenized
// solution, on a cell grid matched to the mesh at one eps.
class CorrectorBank {
 public:
  static CorrectorBank build(const OmegaLagrangian& L, const SolverReport& hom_solution, const DirichletMesh& mesh,
                             double eps, const CellOptions& options = {});

  double eps() const { return eps_; }
  const DirichletMesh& mesh() const { return mesh_; }
  const CellGrid& cell() const { return cell_; }
  const std::vector<CellSolution>& solutions() const { return solutions_; }

 private:
  double eps_ = 0.0;
  DirichletMesh mesh_;
  CellGrid cell_;
  std::vector<CellSolution> solutions_;
};

struct RecoveryResult {
  Eigen::VectorXd u;
  Eigen::MatrixXd tau;
  double value = 0.0;
  double hom_value = 0.0;
  // value - hom_value; the limsup inequality asks for this to vanish as eps -> 0.
  double margin = 0.0;
};

// u + eps psi(x) phi(x, x/eps) with a smoothstep cutoff psi that rises from
// 0 on the boundary to 1 at distance 4 eps.
RecoveryResult recovery_sequence(const SolverReport& hom_solution, const OmegaLagrangian& hom_L,
                                 const OmegaLagrangian& L, const CorrectorBank& bank);

// Affine u = xi x on the torus: the recovered energy equals L_hom(xi, eta).
double affine_recovery_value(const OmegaLagrangian& L, const Point& xi, const Point& eta, double eps, int elements,
                             const CellOptions& options = {});

struct LiminfEntry {
  double eps = 0.0;
  Eigen::VectorXd u;
  Eigen::MatrixXd tau;
};

struct LiminfMargins {
  std::vector<double> eps;
  std::vector<double> value;
  // value_eps - G_hom(u, tau + f).
  std::vector<double> margin;
  double hom_value = 0.0;
};

LiminfMargins liminf_check(const OmegaLagrangian& L, const OmegaLagrangian& hom_L, const DirichletMesh& mesh,
                           const std::vector<LiminfEntry>& sequence, const Eigen::VectorXd& u,
                           const Eigen::MatrixXd& tau, const Eigen::MatrixXd* f = nullptr);

struct GraphConvergenceReport {
  std::vector<double> eps;
  // Per eps, the largest lifted gap of the corrected points and the largest
  // L^2 x H^-1 distance from the homogenized graph points to their
  // projections on the eps graph.
  std::vector<double> gap;
  std::vector<double> distance;
  // Largest distance excess over sqrt(gap).
  double bound_excess = 0.0;
  double rate = 0.0;
  int monotone_checks = 0;
  int monotone_violations = 0;
};

struct GraphConvergenceOptions {
  std::vector<std::string> sources{"const:1", "const:-1", "const:0.5", "const:2", "sin:1", "sin:-1", "sin:2"};
  int monotone_pairs = 100;
  unsigned seed = 1;
  DirichletOptions solve;
  CellOptions cell;
};

GraphConvergenceReport graph_convergence_check(const OmegaLagrangian& L, const HomLagrangian& hom,
                                               const EpsSchedule& schedule,
                                               const GraphConvergenceOptions& options = {});

struct DeviationTable {
  std::vector<double> eps;
  std::vector<double> deviation;
  double rate = 0.0;
};

// |int f(x/eps) phi(x) dx - mean(f) int phi| on (0,1) by the midpoint rule
// with `points_per_period` nodes per period.
DeviationTable riemann_lebesgue_test(const std::function<double(double)>& f, const std::function<double(double)>& phi,
                                     const std::vector<int>& inverse_eps, int points_per_period = 64);

// Piecewise data on a partition of (0,1): measures and (a_i, b_i).
struct JensenPiece {
  double measure = 1.0;
  double a = 0.0;
  double b = 0.0;
};

struct JensenResult {
  // min over constant f of sum |O_i| L(a_i, b_i + f).
  double lhs = 0.0;
  // sum |O_i| inf_eta L(a_i, b_i + eta).
  double rhs = 0.0;
  double margin = 0.0;
};

// In 1D the divergence-free fields on an interval are the constants.
JensenResult jensen_bound_test(const RegionLagrangian& L, const std::vector<JensenPiece>& pieces,
                               double search_radius = 10.0);

}  // namespace sdhom
