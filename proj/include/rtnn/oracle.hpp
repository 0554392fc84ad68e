#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "rtnn/tensor_basis.hpp"

namespace rtnn {

/// Symmetric N x N tensor field sampled on a periodic N-dimensional grid.
/// Grid points are stored row-major (last axis fastest); point i on axis k sits
/// at i * lengths[k] / shape[k]. Only the upper triangle is stored.
class PeriodicGridField {
 public:
  PeriodicGridField() = default;
  PeriodicGridField(std::vector<int> shape, std::vector<double> lengths);

  int dim() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  const std::vector<double>& lengths() const { return lengths_; }
  double spacing(int axis) const { return lengths_[static_cast<std::size_t>(axis)] / shape_[static_cast<std::size_t>(axis)]; }
  Eigen::Index point_count() const { return points_; }
  int component_count() const { return dim() * (dim() + 1) / 2; }

  /// Upper-triangle component index of (a, b).
  int component_index(int a, int b) const;
  Eigen::VectorXd& component(int a, int b) { return data_[static_cast<std::size_t>(component_index(a, b))]; }
  const Eigen::VectorXd& component(int a, int b) const { return data_[static_cast<std::size_t>(component_index(a, b))]; }
  std::vector<Eigen::VectorXd>& components() { return data_; }
  const std::vector<Eigen::VectorXd>& components() const { return data_; }

  Eigen::VectorXd coordinates(Eigen::Index flat) const;
  Eigen::MatrixXd tensor_at(Eigen::Index flat) const;
  void set_tensor(Eigen::Index flat, const Eigen::MatrixXd& S);

  /// Throws NonFinite if any entry is not finite.
  void check_finite() const;

 private:
  std::vector<int> shape_;
  std::vector<double> lengths_;
  Eigen::Index points_ = 0;
  std::vector<Eigen::VectorXd> data_;
};

/// Spectral derivative d_c d_d of a periodic scalar field. Odd-order factors
/// drop the Nyquist mode; the pure second derivative keeps it.
Eigen::VectorXd spectral_second_derivative(const Eigen::VectorXd& f, const std::vector<int>& shape,
                                           const std::vector<double>& lengths, int c, int d);
Eigen::VectorXd spectral_derivative(const Eigen::VectorXd& f, const std::vector<int>& shape,
                                    const std::vector<double>& lengths, int axis);
Eigen::VectorXd spectral_laplacian(const Eigen::VectorXd& f, const std::vector<int>& shape,
                                   const std::vector<double>& lengths);

struct PoissonSolution {
  PeriodicGridField L;
  /// Subtracted component means (symmetric N x N).
  Eigen::MatrixXd means;
};

/// Per component: subtract the mean, then solve Laplacian(L) = S - mean by
/// dividing Fourier coefficients by -|k|^2 (zero mode set to 0).
PoissonSolution poisson_solve_periodic(const PeriodicGridField& S);

/// K_acbd = (d_ab L_dc + d_cd L_ba) - (d_ad L_bc + d_cb L_da), stored with
/// index order (a, c, b, d). Throws NotRiemannLike if L is asymmetric beyond tol.
DenseTensor4<double> build_K_from_L(const Eigen::MatrixXd& L, double tol = 1e-12);

struct RepresentationReport {
  double relative_error = 0.0;
  /// max |sum_c d_c S_bc| / max(1, max |S|), by spectral differentiation.
  double divergence = 0.0;
  bool k_symmetries = true;
  double poisson_residual = 0.0;
  Eigen::MatrixXd means;
};

inline constexpr double kDivergenceGate = 1e-6;

/// Rebuilds S as sum_cd d_c d_d K_acbd plus the constant means and compares.
/// Throws RejectedInput when the divergence gate fails.
RepresentationReport verify_representation(const PeriodicGridField& S, double divergence_gate = kDivergenceGate);

/// Assembled tensor field from random trigonometric coefficient polynomials
/// with integer wavenumbers |k_i| <= max_mode on every axis.
PeriodicGridField synthesize_assembled_grid(const std::vector<int>& shape, const std::vector<double>& lengths,
                                            int max_mode, std::uint64_t seed, bool identity_offset = true);

}  // namespace rtnn
