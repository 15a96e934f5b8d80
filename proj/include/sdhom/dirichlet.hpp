#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "sdhom/lagrangian.hpp"

namespace sdhom {

// Omega = (0,1)^N with M interior nodes per axis and u = 0 on the boundary.
// Elements are the M+1 intervals in 1D and the 2 (M+1)^2 right triangles of
// the uniform grid in 2D; gradients and fluxes are constant per element.
struct DirichletMesh {
  int dim = 1;
  int interior = 8;

  DirichletMesh() = default;
  DirichletMesh(int dim, int interior);

  double spacing() const { return 1.0 / (interior + 1); }
  Index node_count() const;
  Index element_count() const;
  // Element measure (h, or h^2 / 2) and nodal measure h^N.
  double element_weight() const;
  double node_weight() const;
  // Interior node coordinates and element centroids, one column each.
  Eigen::MatrixXd nodes() const;
  Eigen::MatrixXd centroids() const;
  bool operator==(const DirichletMesh& other) const = default;
};

// A flux per element and its discrete divergence -div f at the nodes.
struct FluxField {
  Eigen::MatrixXd f;
  Eigen::VectorXd divergence;
};

// Discrete gradient B, its weighted adjoint, and exact projections onto
// range(B) and ker(B^T) through a sparse Cholesky factor of B^T B.
class DirichletOperators {
 public:
  explicit DirichletOperators(const DirichletMesh& mesh);

  const DirichletMesh& mesh() const { return mesh_; }
  Eigen::MatrixXd gradient(const Eigen::VectorXd& u) const;
  // -div f, so that <Du, f>_elements = <u, -div f>_nodes.
  Eigen::VectorXd neg_divergence(const Eigen::MatrixXd& f) const;
  // u with D u = P_range f.
  Eigen::VectorXd potential(const Eigen::MatrixXd& f) const;
  void project_range(Eigen::MatrixXd& f) const;
  void project_kernel(Eigen::MatrixXd& f) const;
  // Solves -div D u = rhs.
  Eigen::VectorXd poisson(const Eigen::VectorXd& rhs) const;

  double inner_elements(const Eigen::MatrixXd& f, const Eigen::MatrixXd& g) const;
  double inner_nodes(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const;

 private:
  DirichletMesh mesh_;
  Eigen::SparseMatrix<double> B_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> laplacian_;
};

struct DirichletOptions {
  // Oscillation scale: L is evaluated at x / eps.
  double eps = 1.0;
  double p = 2.0;
  // Certificate threshold; 0 picks 1e-6 for p = 2 and 1e-4 otherwise.
  double tol_solve = 0.0;
  // Iteration continues until the projected gradient reaches this floor.
  double residual_floor = 1e-10;
  int max_iter = 50000;
  std::vector<double> continuation{1e-1, 1e-2, 1e-3};
  // Required: a coercivity record on L (or explicit opt-out for tests).
  bool require_growth = true;

  double tolerance() const { return tol_solve > 0.0 ? tol_solve : (p == 2.0 ? 1e-6 : 1e-4); }
};

struct SolverReport {
  Eigen::VectorXd u;
  Eigen::MatrixXd gradient;
  FluxField flux;
  // I(u) = F(u, u*) - <u, u*> and the lifted energy F(u, u*).
  double gap = 0.0;
  double energy = 0.0;
  // Largest pointwise gap L(x, Du, f) - <Du, f> over elements.
  double max_local_gap = 0.0;
  int iterations = 0;
  double wall_time = 0.0;
  std::vector<double> gap_history;
};

FluxField particular_flux(const DirichletOperators& ops, const Eigen::VectorXd& u_star);

// The lifted Lagrangian on a mesh: L sampled at element centroids / eps.
class DirichletProblem {
 public:
  DirichletProblem(const OmegaLagrangian& L, const DirichletMesh& mesh, DirichletOptions options = {});
  DirichletProblem(SampledLagrangian L, const DirichletMesh& mesh, DirichletOptions options = {});

  const DirichletOperators& operators() const { return ops_; }
  const SampledLagrangian& sampled() const { return sampled_; }
  const DirichletOptions& options() const { return options_; }

  // F(u, u*) = min over f' in ker(div) of sum_e w L(x_e, Du, f0 + f').
  double lifted_value(const Eigen::VectorXd& u, const Eigen::VectorXd& u_star, Eigen::MatrixXd* flux = nullptr) const;
  SolverReport solve(const Eigen::VectorXd& u_star) const;
  // sum_e w L(x_e, A_e, F_e).
  double energy(const Eigen::MatrixXd& A, const Eigen::MatrixXd& F) const;
  // Pointwise gaps L(x_e, A_e, F_e) - <A_e, F_e>.
  Eigen::VectorXd local_gaps(const Eigen::MatrixXd& A, const Eigen::MatrixXd& F) const;

  struct Minimized {
    Eigen::MatrixXd first;
    Eigen::MatrixXd second;
    double value = 0.0;
    double residual = 0.0;
    int iterations = 0;
    std::vector<double> history;
  };
  // Minimizes sum_e w L_e(base_a + X, base_b + Y) + extra(X, Y) over
  // X in range(D) (or fixed at zero) and Y in ker(div), with continuation on
  // non-smooth Lagrangians. `extra` returns its value and adds its gradient.
  using Extra = std::function<double(const Eigen::MatrixXd&, const Eigen::MatrixXd&, Eigen::MatrixXd&,
                                     Eigen::MatrixXd&)>;
  Minimized minimize(const Eigen::MatrixXd& base_a, const Eigen::MatrixXd& base_b, bool free_first,
                     const Extra& extra) const;

 private:
  DirichletOperators ops_;
  SampledLagrangian sampled_;
  std::vector<SampledLagrangian> smoothed_;
  DirichletOptions options_;
};

SolverReport solve_dirichlet(const OmegaLagrangian& L, const DirichletMesh& mesh, const Eigen::VectorXd& u_star,
                             const DirichletOptions& options = {});

double lifted_value(const OmegaLagrangian& L, const DirichletMesh& mesh, const Eigen::VectorXd& u,
                    const Eigen::VectorXd& u_star, const DirichletOptions& options = {});

// Projection of (u0, u0*) onto the graph {L(u, u*) = <u, u*>} with the
// duality map of the H^1_0 norm ||u|| = ||Du||.
struct BrlProjection {
  Eigen::VectorXd u;
  Eigen::VectorXd u_star;
  // Gap of the input pair.
  double eps = 0.0;
  double distance_u = 0.0;
  double distance_u_star = 0.0;
  // |L(u, u*) - L(u0, u0*)| and the bound 2 eps + sqrt(eps) (||u0|| + ||u0*||).
  double value_change = 0.0;
  double value_bound = 0.0;
  // Gap of the returned pair.
  double gap = 0.0;
};

BrlProjection brl_project(const DirichletProblem& problem, const Eigen::VectorXd& u0, const Eigen::VectorXd& u0_star);

// Finite-dimensional version on R^N x R^N with the Euclidean duality map.
struct BrlPoint {
  Point u;
  Point u_star;
  double eps = 0.0;
  double distance_u = 0.0;
  double distance_u_star = 0.0;
  double value_change = 0.0;
  double value_bound = 0.0;
};

BrlPoint brl_project(const RegionLagrangian& L, const Point& u0, const Point& u0_star);

}  // namespace sdhom
