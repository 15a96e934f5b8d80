#pragma once

#include <complex>
#include <vector>

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

#include "sdhom/grid.hpp"

namespace sdhom {

// Periodic grid on the unit cell [0,1)^N with n cells per axis. Scalar
// fields live on nodes i h, vector fields are forward differences attached to
// cell i and sampled at the cell center (i + 1/2) h. Flat index is
// row-major, last axis fastest.
struct CellGrid {
  int dim = 1;
  int nodes_per_axis = 8;

  CellGrid() = default;
  CellGrid(int dim, int nodes_per_axis);

  double spacing() const { return 1.0 / nodes_per_axis; }
  Index size() const;
  // Cell centers, one column per cell.
  Eigen::MatrixXd centers() const;
  bool operator==(const CellGrid& other) const = default;
};

// Discrete periodic calculus: D is the forward difference and div = -D^T.
// The spaces
//   E = range(D)                          (discrete gradients)
//   G = ker(D^T) with zero mean           (divergence-free, zero mean)
// split the zero-mean vector fields orthogonally; both projectors are applied
// exactly in Fourier space.
class PeriodicCalculus {
 public:
  explicit PeriodicCalculus(const CellGrid& grid);

  const CellGrid& grid() const { return grid_; }

  Eigen::MatrixXd gradient(const Eigen::VectorXd& phi) const;
  Eigen::VectorXd divergence(const Eigen::MatrixXd& g) const;

  void project_gradients(Eigen::MatrixXd& v) const;
  void project_solenoidal(Eigen::MatrixXd& g) const;
  // Zero-mean phi with D phi = P_E v.
  Eigen::VectorXd potential(const Eigen::MatrixXd& v) const;

 private:
  using Spectrum = std::vector<std::complex<double>>;

  CellGrid grid_;
  // Fourier multipliers of the forward difference, one per axis and mode.
  std::vector<Spectrum> symbol_;
  mutable Eigen::FFT<double> fft_;

  Spectrum forward(const Eigen::VectorXd& f) const;
  Eigen::VectorXd inverse(const Spectrum& s) const;
};

}  // namespace sdhom
