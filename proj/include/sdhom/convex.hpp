#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "sdhom/grid.hpp"

namespace sdhom {

// Deviation of a table from a property that should hold on nodes.
struct GapReport {
  double max_gap = 0.0;
  Point argmax_point;
  double tolerance_used = 0.0;
  Index nodes_checked = 0;
  // Smallest L(a,b) - <a,b> over finite nodes (selfdual checks only).
  double min_basic_margin = kInfinity;

  bool passed() const { return max_gap <= tolerance_used && min_basic_margin >= -tolerance_used; }
};

inline double default_tol_gap(double p) { return p == 2.0 ? 1e-8 : 1e-6; }

// Output radius that keeps conjugate argmaxes interior for a function with
// upper growth C1 |x|^p on [-R, R].
inline double conjugate_radius(double c1, double p, double radius);

// Discrete conjugate f*(y) = max over nodes x of <x,y> - f(x), evaluated on the
// nodes of `out`. `boundary_argmax[i]` is set when the maximizer for output
// node i sits on the input box boundary, i.e. the value there is a box
// artefact rather than the conjugate of f.
struct ConjugateTable {
  TabulatedFunction table;
  std::vector<std::uint8_t> boundary_argmax;
  Index boundary_count = 0;
};

ConjugateTable conjugate(const TabulatedFunction& f, const std::vector<BoxGrid>& out);

// Strict transform: throws BoxTooSmall if any output node has a boundary argmax.
TabulatedFunction legendre_transform(const TabulatedFunction& f, const std::vector<BoxGrid>& out);

// h(x) = min over nodes y of f(y) + g(x - y); +inf where x - y leaves the box.
TabulatedFunction inf_convolution(const TabulatedFunction& f, const TabulatedFunction& g);

// L_lambda(u,u*) = min over nodes (v,v*) of
//   L(v,v*) + |u-v|^2/(2 lambda) + lambda |v|^2/2 + |u*-v*|^2/(2 lambda) + lambda |v*|^2/2.
TabulatedFunction moreau_regularize(const TabulatedFunction& L, double lambda);

struct ConvexityScan {
  bool convex = true;
  double worst_violation = 0.0;
  Index worst_node = -1;
};

// Midpoint convexity along every axis and every pairwise diagonal.
ConvexityScan convexity_scan(const TabulatedFunction& f, double tol);

struct GapOptions {
  double tol_gap = 1e-8;
  double tol_convexity = 1e-7;
  bool require_convex = true;
};

// max |L*(b,a) - L(a,b)| over interior nodes whose conjugate maximizer is
// interior; also records min L(a,b) - <a,b>. Throws NotConvex when the
// midpoint scan fails and convexity is required.
GapReport selfdual_gap_check(const TabulatedFunction& L, const GapOptions& options = {});

// Image of a under the graph {L(a,b) = <a,b>}: nodes b with gap <= tol.
// In 1D the image is the interval [lo, hi]; a single-node image is refined to
// the vertex of the local parabola through the gap values.
struct GraphImage {
  std::vector<Point> nodes;
  Point lo;
  Point hi;
  Point center;
  double min_gap = 0.0;
};

struct GraphOptions {
  double tol = 1e-3;
  // Nodes within flat_tol of the smallest gap count as part of the image.
  double flat_tol = 1e-9;
};

GraphImage graph_extract(const TabulatedFunction& L, const Point& a, const GraphOptions& options = {});

// argmin over nodes of f(y) + |y - x|^2 / (2 step), refined by one parabolic
// step per axis.
Point prox(const TabulatedFunction& f, const Point& x, double step);

// Discrete biconjugate on the same nodes, tagged lower_convex_envelope.
TabulatedFunction convex_envelope(const TabulatedFunction& f);

inline double conjugate_radius(double c1, double p, double radius) {
  return c1 * (std::pow(radius, p - 1.0) + 1.0);
}

}  // namespace sdhom
