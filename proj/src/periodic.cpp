#include "sdhom/periodic.hpp"

#include <cmath>
#include <numbers>

namespace sdhom {

CellGrid::CellGrid(int dim, int nodes_per_axis) : dim(dim), nodes_per_axis(nodes_per_axis) {
  if (dim < 1 || dim > 2) throw Error(ErrorCode::InvalidParameter, "cell grids support N = 1, 2");
  if (nodes_per_axis < 8) throw Error(ErrorCode::InvalidParameter, "cell grids need at least 8 nodes per axis");
}

Index CellGrid::size() const { return dim == 1 ? nodes_per_axis : Index{nodes_per_axis} * nodes_per_axis; }

Eigen::MatrixXd CellGrid::centers() const {
  Eigen::MatrixXd x(dim, size());
  const int n = nodes_per_axis;
  for (Index k = 0; k < size(); ++k) {
    if (dim == 1) {
      x(0, k) = (static_cast<double>(k) + 0.5) / n;
    } else {
      x(0, k) = (static_cast<double>(k / n) + 0.5) / n;
      x(1, k) = (static_cast<double>(k % n) + 0.5) / n;
    }
  }
  return x;
}

PeriodicCalculus::PeriodicCalculus(const CellGrid& grid) : grid_(grid) {
  const int n = grid.nodes_per_axis;
  const double h = grid.spacing();
  Spectrum s(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double theta = 2.0 * std::numbers::pi * k / n;
    s[static_cast<std::size_t>(k)] = (std::complex<double>(std::cos(theta), std::sin(theta)) - 1.0) / h;
  }
  symbol_.assign(static_cast<std::size_t>(grid.dim), s);
}

Eigen::MatrixXd PeriodicCalculus::gradient(const Eigen::VectorXd& phi) const {
  const int n = grid_.nodes_per_axis;
  const double inv_h = 1.0 / grid_.spacing();
  Eigen::MatrixXd g(grid_.dim, grid_.size());
  for (Index k = 0; k < grid_.size(); ++k) {
    if (grid_.dim == 1) {
      g(0, k) = (phi[(k + 1) % n] - phi[k]) * inv_h;
    } else {
      const Index i = k / n, j = k % n;
      g(0, k) = (phi[((i + 1) % n) * n + j] - phi[k]) * inv_h;
      g(1, k) = (phi[i * n + (j + 1) % n] - phi[k]) * inv_h;
    }
  }
  return g;
}

Eigen::VectorXd PeriodicCalculus::divergence(const Eigen::MatrixXd& g) const {
  const int n = grid_.nodes_per_axis;
  const double inv_h = 1.0 / grid_.spacing();
  Eigen::VectorXd d(grid_.size());
  for (Index k = 0; k < grid_.size(); ++k) {
    if (grid_.dim == 1) {
      d[k] = (g(0, k) - g(0, (k + n - 1) % n)) * inv_h;
    } else {
      const Index i = k / n, j = k % n;
      d[k] = (g(0, k) - g(0, ((i + n - 1) % n) * n + j) + g(1, k) - g(1, i * n + (j + n - 1) % n)) * inv_h;
    }
  }
  return d;
}

PeriodicCalculus::Spectrum PeriodicCalculus::forward(const Eigen::VectorXd& f) const {
  const int n = grid_.nodes_per_axis;
  Spectrum out(static_cast<std::size_t>(f.size()));
  std::vector<std::complex<double>> line_in(static_cast<std::size_t>(n)), line_out;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) line_in[static_cast<std::size_t>(j)] = f[i * n + j];
    fft_.fwd(line_out, line_in);
    for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i * n + j)] = line_out[static_cast<std::size_t>(j)];
  }
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) line_in[static_cast<std::size_t>(i)] = out[static_cast<std::size_t>(i * n + j)];
    fft_.fwd(line_out, line_in);
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i * n + j)] = line_out[static_cast<std::size_t>(i)];
  }
  return out;
}

Eigen::VectorXd PeriodicCalculus::inverse(const Spectrum& s) const {
  const int n = grid_.nodes_per_axis;
  Spectrum tmp = s;
  std::vector<std::complex<double>> line_in(static_cast<std::size_t>(n)), line_out;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) line_in[static_cast<std::size_t>(i)] = tmp[static_cast<std::size_t>(i * n + j)];
    fft_.inv(line_out, line_in);
    for (int i = 0; i < n; ++i) tmp[static_cast<std::size_t>(i * n + j)] = line_out[static_cast<std::size_t>(i)];
  }
  Eigen::VectorXd out(static_cast<Index>(s.size()));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) line_in[static_cast<std::size_t>(j)] = tmp[static_cast<std::size_t>(i * n + j)];
    fft_.inv(line_out, line_in);
    for (int j = 0; j < n; ++j) out[i * n + j] = line_out[static_cast<std::size_t>(j)].real();
  }
  return out;
}

void PeriodicCalculus::project_gradients(Eigen::MatrixXd& v) const {
  if (grid_.dim == 1) {
    // Every zero-mean periodic sequence is a forward difference.
    v.array() -= v.mean();
    return;
  }
  const int n = grid_.nodes_per_axis;
  Spectrum v0 = forward(v.row(0).transpose()), v1 = forward(v.row(1).transpose());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const auto k = static_cast<std::size_t>(i * n + j);
      const auto d0 = symbol_[0][static_cast<std::size_t>(i)], d1 = symbol_[1][static_cast<std::size_t>(j)];
      const double nd = std::norm(d0) + std::norm(d1);
      if (nd == 0.0) {
        v0[k] = v1[k] = 0.0;
        continue;
      }
      const auto c = (std::conj(d0) * v0[k] + std::conj(d1) * v1[k]) / nd;
      v0[k] = d0 * c;
      v1[k] = d1 * c;
    }
  v.row(0) = inverse(v0).transpose();
  v.row(1) = inverse(v1).transpose();
}

void PeriodicCalculus::project_solenoidal(Eigen::MatrixXd& g) const {
  if (grid_.dim == 1) {
    // Divergence-free means constant; zero mean leaves nothing.
    g.setZero();
    return;
  }
  Eigen::MatrixXd e = g;
  project_gradients(e);
  g -= e;
  for (Index r = 0; r < g.rows(); ++r) g.row(r).array() -= g.row(r).mean();
}

Eigen::VectorXd PeriodicCalculus::potential(const Eigen::MatrixXd& v) const {
  const int n = grid_.nodes_per_axis;
  if (grid_.dim == 1) {
    const double mean = v.mean();
    Eigen::VectorXd phi(n);
    phi[0] = 0.0;
    for (int k = 1; k < n; ++k) phi[k] = phi[k - 1] + (v(0, k - 1) - mean) * grid_.spacing();
    phi.array() -= phi.mean();
    return phi;
  }
  Spectrum v0 = forward(v.row(0).transpose()), v1 = forward(v.row(1).transpose());
  Spectrum phi(v0.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const auto k = static_cast<std::size_t>(i * n + j);
      const auto d0 = symbol_[0][static_cast<std::size_t>(i)], d1 = symbol_[1][static_cast<std::size_t>(j)];
      const double nd = std::norm(d0) + std::norm(d1);
      phi[k] = nd == 0.0 ? 0.0 : (std::conj(d0) * v0[k] + std::conj(d1) * v1[k]) / nd;
    }
  return inverse(phi);
}

}  // namespace sdhom
