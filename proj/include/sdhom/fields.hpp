#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "sdhom/convex.hpp"
#include "sdhom/lagrangian.hpp"

namespace sdhom {

// Two-sided bound <xi, eta> >= max{c1 |xi|^p / p - m1, c2 |eta|^q / q - m2}.
struct Growth {
  double c1 = 1.0;
  double c2 = 1.0;
  double m1 = 0.0;
  double m2 = 0.0;
  double p = 2.0;

  double q() const { return p / (p - 1.0); }
};

enum class FieldKind { linear, power, potential_plus_skew, sampled_graph_1d };

const char* to_string(FieldKind kind);
FieldKind field_kind_from_string(const std::string& name);

struct FieldRegion {
  CellBox box;
  // linear and power: beta = coefficient |xi|^{p-2} xi.
  // potential_plus_skew: beta = coefficient |xi|^{p-2} xi + drift + gamma xi.
  double coefficient = 1.0;
  Point drift;
  SmallMatrix gamma;
  // sampled_graph_1d: monotone (xi, eta) list; repeated xi encode vertical segments.
  std::vector<std::pair<double, double>> graph;
};

struct MonotoneField {
  FieldKind kind = FieldKind::linear;
  int dim = 1;
  double p = 2.0;
  std::vector<FieldRegion> regions;
  std::optional<Growth> growth;

  double q() const { return p / (p - 1.0); }
  int region_at(const Point& x) const;
  // Throws InvalidParameter when an invariant of the kind is broken.
  void validate() const;

  // All of beta(x_region, xi): a single point except on vertical segments of
  // a sampled graph.
  std::vector<Point> image(int region, const Point& xi) const;
  // Graph pairs (xi, eta) with xi in [-radius, radius]^N and consecutive
  // points at most `step` apart in each coordinate.
  std::vector<std::pair<Point, Point>> graph_sample(int region, double radius, double step) const;
};

// Two-phase laminate helper: coefficient values on [0, 1/2) and [1/2, 1) along x_1.
MonotoneField two_phase_field(FieldKind kind, int dim, double p, double first, double second,
                              std::optional<Growth> growth = std::nullopt);

// Scans xi over [-radius, radius]^N with `samples` points per axis in every
// region. Throws GrowthViolationError when the worst violation exceeds tol.
GapReport verify_growth(const MonotoneField& beta, int samples, double radius = 4.0, double tol = 1e-9);

// N(a,b) = max over sampled graph pairs of <b,xi> + <a - xi, eta> on the
// product grid {a_grid, b_grid}.
TabulatedFunction fitzpatrick(const MonotoneField& beta, int region, const BoxGrid& a_grid, const BoxGrid& b_grid);

struct SelfdualizeOptions {
  double radius = 2.0;
  // Zero picks a b-radius that covers beta on the a-box.
  double b_radius = 0.0;
  int points_per_axis = 129;
  // Allowed selfdual gap is tol_gap + gap_slope * h.
  double tol_gap = 1e-6;
  double gap_slope = 10.0;
};

// Per-region tables of the selfdual construction
//   L(a,b) = min over w of N(z + w)/2 + N*(swap(z - w))/2 + 2^p|w_a|^p/(4p) + 2^q|w_b|^q/(4q)
// with z = (a,b), together with their Fitzpatrick tables.
struct SelfdualTables {
  std::vector<TabulatedFunction> lagrangian;
  std::vector<TabulatedFunction> fitzpatrick;
  std::vector<TabulatedFunction> fitzpatrick_dual;
  std::vector<GapReport> gaps;
};

SelfdualTables selfdualize_tables(const MonotoneField& beta, const SelfdualizeOptions& options = {});

// Selfdual Lagrangian field with table regions. Throws SelfdualizationFailed
// when a region table fails the gap check.
OmegaLagrangian selfdualize(const MonotoneField& beta, const SelfdualizeOptions& options = {});

// L(a,b) = phi(a) + phi*(b - Gamma a) from a tabulated convex phi; phi* is the
// discrete transform onto b_grid.
TabulatedFunction potential_table(const TabulatedFunction& phi, const SmallMatrix& gamma, const BoxGrid& b_grid);

struct PotentialRegion {
  CellBox box;
  TabulatedFunction phi;
};

OmegaLagrangian potential_lagrangian(const std::vector<PotentialRegion>& phi, const SmallMatrix& gamma,
                                     const BoxGrid& b_grid);

// Closed-form potential Lagrangians for the linear, power and
// potential_plus_skew kinds; growth constants are attached when known.
OmegaLagrangian lagrangian_from_field(const MonotoneField& beta);

}  // namespace sdhom
