#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <vector>

#include <Eigen/Core>

namespace sdhom {

struct SpgOptions {
  int max_iter = 20000;
  // Stop when the projected gradient, measured in the weighted norm, drops below tol.
  double tol = 1e-8;
  // Quadrature weight w of the objective sum_i w * l(x_i); the residual is |P grad| / sqrt(w).
  double weight = 1.0;
  int memory = 10;
  double sigma = 1e-4;
  double step_min = 1e-12;
  double step_max = 1e12;
};

struct SpgState {
  const Eigen::VectorXd& x;
  double value;
  double residual;
  int iteration;
};

struct SpgResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;
};

struct NeverStop {
  bool operator()(const SpgState&) const { return false; }
};

// Spectral projected gradient on an affine set {x0 + V} where `project`
// applies the orthogonal projector onto the linear subspace V in place.
// `objective(x, grad)` returns the value and fills grad; +inf values are
// rejected by the line search. `stop` may end the iteration early.
template <class Objective, class Projection, class Stop = NeverStop>
SpgResult minimize_projected(Objective&& objective, Projection&& project, Eigen::VectorXd x,
                             const SpgOptions& options = {}, Stop&& stop = Stop{}) {
  SpgResult result;
  const Eigen::Index n = x.size();
  Eigen::VectorXd grad(n), pg(n), trial(n), trial_grad(n), trial_pg(n), dir(n);
  double value = objective(x, grad);
  pg = grad;
  project(pg);
  const double scale = 1.0 / std::sqrt(options.weight);
  double residual = pg.norm() * scale;
  double step = pg.lpNorm<Eigen::Infinity>() > 0.0 ? 1.0 / pg.lpNorm<Eigen::Infinity>() : 1.0;
  step = std::clamp(step, options.step_min, options.step_max);
  std::deque<double> recent{value};

  int it = 0;
  for (; it < options.max_iter; ++it) {
    result.history.push_back(residual);
    if (residual <= options.tol || stop(SpgState{x, value, residual, it})) {
      result.converged = true;
      break;
    }
    dir = -step * pg;
    const double slope = grad.dot(dir);
    const double reference = *std::max_element(recent.begin(), recent.end());
    const double slack = 1e-14 * std::max(1.0, std::abs(reference));
    double t = 1.0;
    double trial_value = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      trial = x + t * dir;
      trial_value = objective(trial, trial_grad);
      if (std::isfinite(trial_value) && trial_value <= reference + options.sigma * t * slope + slack) {
        accepted = true;
        break;
      }
      double next = 0.5 * t;
      if (std::isfinite(trial_value)) {
        // Minimizer of the quadratic through f(x), f'(x) and f(x + t d).
        const double denom = 2.0 * (trial_value - value - t * slope);
        if (denom > 0.0) next = std::clamp(-slope * t * t / denom, 0.1 * t, 0.5 * t);
      }
      t = next;
    }
    if (!accepted) break;
    trial_pg = trial_grad;
    project(trial_pg);
    const Eigen::VectorXd s = trial - x;
    const Eigen::VectorXd y = trial_pg - pg;
    const double sy = s.dot(y);
    step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, options.step_min, options.step_max) : options.step_max;
    x.swap(trial);
    grad.swap(trial_grad);
    pg.swap(trial_pg);
    value = trial_value;
    residual = pg.norm() * scale;
    recent.push_back(value);
    if (static_cast<int>(recent.size()) > options.memory) recent.pop_front();
  }
  if (!result.converged && it >= options.max_iter) result.history.push_back(residual);
  result.x = std::move(x);
  result.value = value;
  result.residual = residual;
  result.iterations = it;
  return result;
}

}  // namespace sdhom
