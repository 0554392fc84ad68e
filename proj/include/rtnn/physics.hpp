#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "rtnn/assembly.hpp"

namespace rtnn {

/// Isentropic vortex advected by a uniform free stream on [0, Lx] x [0, Ly].
struct EulerVortexConfig {
  double Lx = 5.0;
  double Ly = 5.0;
  double T = 1.0;
  double gamma = 1.4;
  double beta = 2.5;
  double xc = 2.0;
  double yc = 2.0;
  double rho_inf = 1.0;
  double u_inf = 1.0;
  double v_inf = 1.0;
  double T_inf = 1.0;
  /// p = kappa rho^gamma; 1 / (2 gamma) keeps the profile in radial equilibrium.
  double kappa = 1.0 / (2.0 * 1.4);

  void validate() const;
};

/// Ethier-Steinman Beltrami flow on [-1, 1]^3 x [0, T].
struct BeltramiConfig {
  double T = 1.0;
  double nu = 1.0;

  void validate() const;
};

/// Decaying Taylor-Green state with u = B on the periodic box [0, L]^2.
struct MhdConfig {
  double L = 2.0 * std::numbers::pi;
  double T = 1.0;
  double nu = 0.1;
  double eta = 0.1;

  void validate() const;
};

template <typename Scalar>
struct EulerState {
  Scalar rho, u, v, p, E;
};

template <typename Scalar>
EulerState<Scalar> euler_vortex_exact(const EulerVortexConfig& c, const Scalar& t, const Scalar& x, const Scalar& y) {
  using std::exp;
  using std::pow;
  const double pi = std::numbers::pi;
  const Scalar xr = x - c.u_inf * t - c.xc;
  const Scalar yr = y - c.v_inf * t - c.yc;
  const Scalar e = exp(1.0 - (xr * xr + yr * yr));
  EulerState<Scalar> s;
  s.u = c.u_inf - (c.beta / (2.0 * pi)) * yr * e;
  s.v = c.v_inf + (c.beta / (2.0 * pi)) * xr * e;
  const Scalar temp = c.T_inf - ((c.gamma - 1.0) * c.beta * c.beta / (8.0 * pi * pi)) * e * e;
  s.rho = c.rho_inf * pow(temp / c.T_inf, 1.0 / (c.gamma - 1.0));
  s.p = c.kappa * pow(s.rho, c.gamma);
  s.E = s.p / (c.gamma - 1.0) + 0.5 * s.rho * (s.u * s.u + s.v * s.v);
  return s;
}

template <typename Scalar>
struct BeltramiState {
  Scalar u, v, w, p;
};

template <typename Scalar>
BeltramiState<Scalar> beltrami_exact(const BeltramiConfig& c, const Scalar& t, const Scalar& x, const Scalar& y,
                                     const Scalar& z) {
  using std::cos;
  using std::exp;
  using std::sin;
  const Scalar decay = exp(-c.nu * t);
  const Scalar ex = exp(x), ey = exp(y), ez = exp(z);
  BeltramiState<Scalar> s;
  s.u = -(ex * sin(y + z) + ez * cos(x + y)) * decay;
  s.v = -(ey * sin(z + x) + ex * cos(y + z)) * decay;
  s.w = -(ez * sin(x + y) + ey * cos(z + x)) * decay;
  s.p = -0.5 *
        (ex * ex + ey * ey + ez * ez + 2.0 * sin(x + y) * cos(z + x) * ey * ez +
         2.0 * sin(y + z) * cos(x + y) * ez * ex + 2.0 * sin(z + x) * cos(y + z) * ex * ey) *
        decay * decay;
  return s;
}

template <typename Scalar>
struct MhdState {
  Scalar u, v, Bx, By, psi, p;
};

template <typename Scalar>
MhdState<Scalar> mhd_exact(const MhdConfig& c, const Scalar& t, const Scalar& x, const Scalar& y) {
  using std::cos;
  using std::exp;
  using std::sin;
  const Scalar decay = exp(-2.0 * c.nu * t);
  MhdState<Scalar> s;
  s.u = sin(x) * cos(y) * decay;
  s.v = -(cos(x) * sin(y)) * decay;
  s.Bx = s.u;
  s.By = s.v;
  s.psi = sin(x) * sin(y) * decay;
  s.p = -0.5 * (s.u * s.u + s.v * s.v);
  return s;
}

enum class ProblemKind { EulerVortex, Beltrami, Mhd2d };

ProblemKind parse_problem_kind(const std::string& id);
std::string to_string(ProblemKind kind);

/// Axis-aligned space-time box; coordinate 0 is time.
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;
};

/// One benchmark problem with its parameters.
struct ProblemSpec {
  ProblemKind kind = ProblemKind::EulerVortex;
  EulerVortexConfig euler;
  BeltramiConfig beltrami;
  MhdConfig mhd;

  int dim() const;
  Box domain() const;
  bool incompressible() const { return kind != ProblemKind::EulerVortex; }
  bool has_potential() const { return kind == ProblemKind::Mhd2d; }
  bool periodic() const { return kind == ProblemKind::Mhd2d; }
  /// Fields compared at boundary/initial points and in metrics.
  std::vector<std::string> field_names() const;
  Eigen::VectorXd exact_fields(const Eigen::VectorXd& x) const;
  void validate() const;
};

struct CollocationCounts {
  int interior = 500;
  int boundary = 100;
  int initial = 100;
  int periodic = 0;
};

/// Collocation points stored column-wise (N x P).
struct CollocationSet {
  Eigen::MatrixXd interior;
  Eigen::MatrixXd boundary;
  Eigen::MatrixXd boundary_targets;  ///< fields x P
  Eigen::MatrixXd initial;
  Eigen::MatrixXd initial_targets;
  /// Periodic images: column p of periodic_a and periodic_b are the same point
  /// on opposite faces.
  Eigen::MatrixXd periodic_a;
  Eigen::MatrixXd periodic_b;
  std::uint64_t seed = 0;
};

/// Uniform i.i.d. sampling. Boundary points pick a spatial face uniformly;
/// periodic problems get paired points instead of boundary points.
CollocationSet sample_collocation(const ProblemSpec& problem, const CollocationCounts& counts, std::uint64_t seed);

/// Uniform points inside the domain with exact fields attached.
struct ValidationSet {
  Eigen::MatrixXd points;  ///< N x P
  Eigen::MatrixXd fields;  ///< fields x P
  std::vector<std::string> names;
};

ValidationSet make_validation_set(const ProblemSpec& problem, int count, std::uint64_t seed);

struct RelativeL2 {
  std::vector<std::string> names;
  Eigen::VectorXd per_field;
  double mean = 0.0;
};

/// ||pred_f - exact_f||_2 / ||exact_f||_2 per field row and their plain mean.
RelativeL2 relative_l2(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& exact, const std::vector<std::string>& names);

/// Mean of ||sigma_dev||_F^2.
double deviatoric_loss(std::span<const EulerFields<double>> samples);

template <typename Scalar>
Scalar frobenius_squared(const MatrixX<Scalar>& A) {
  Scalar s(0.0);
  for (Eigen::Index j = 0; j < A.cols(); ++j)
    for (Eigen::Index i = 0; i < A.rows(); ++i) s += A(i, j) * A(i, j);
  return s;
}

/// d_t E + sum_k d_k((E + p) u_k) from first-order jets in (t, x_1..x_n).
template <typename Scalar>
Scalar energy_residual(const EulerFields<Jet<Scalar, 1>>& f) {
  const Jet<Scalar, 1> H = f.energy + f.pressure;
  Scalar r = f.energy.d(0);
  for (Eigen::Index k = 0; k < f.velocity.size(); ++k) {
    const Jet<Scalar, 1> flux = H * f.velocity(k);
    r += flux.d(static_cast<int>(k) + 1);
  }
  return r;
}

/// R = sigma_dev + nu (grad u + grad u^T), with (grad u)_ij = d_j u_i.
template <typename Scalar>
MatrixX<Scalar> viscous_residual(const MatrixX<Jet<Scalar, 1>>& sigma_dev, const VectorX<Jet<Scalar, 1>>& velocity,
                                 double nu) {
  const Eigen::Index n = velocity.size();
  MatrixX<Scalar> R(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const int ii = static_cast<int>(i) + 1, jj = static_cast<int>(j) + 1;
      R(i, j) = sigma_dev(i, j).value() + nu * (velocity(i).d(jj) + velocity(j).d(ii));
    }
  return R;
}

template <typename Scalar>
MatrixX<Scalar> viscous_residual(const NsFields<Jet<Scalar, 1>>& f, double nu) {
  return viscous_residual<Scalar>(f.sigma_dev, f.velocity, nu);
}

/// d_t B + (u . grad) B - (B . grad) u - eta lap B for B = (d_y psi, -d_x psi)
/// with psi a third-order jet in (t, x, y).
template <typename Scalar>
VectorX<Scalar> induction_residual(const Jet<Scalar, 3>& psi, const VectorX<Jet<Scalar, 1>>& velocity, double eta) {
  if (velocity.size() != 2) throw Error(ErrorCode::ShapeMismatch, "2D induction needs two velocity components");
  const VectorX<Jet<Scalar, 2>> B = magnetic_field(psi);
  VectorX<Scalar> r(2);
  for (int i = 0; i < 2; ++i) {
    const Jet<Scalar, 2>& b = B(i);
    Scalar v = b.d(0) + velocity(0).value() * b.d(1) + velocity(1).value() * b.d(2);
    v -= B(0).value() * velocity(i).d(1) + B(1).value() * velocity(i).d(2);
    v -= eta * (b.d2(1, 1) + b.d2(2, 2));
    r(i) = v;
  }
  return r;
}

/// Mean over points of sum over fields of (pred - target)^2, for boundary and
/// initial sets each; returns their sum. `predict` maps a point to fields.
double boundary_and_initial_losses(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& predict,
                                   const CollocationSet& colloc);

/// max_i | explicit momentum residual_i + (div sigma_dev)_i |, both by central
/// differences of the fields extracted from S (compressible extraction).
double momentum_equivalence_check(const TensorField& S, const Eigen::VectorXd& x, double h, double gamma = 1.4);
double momentum_equivalence_check(const CoefficientNetwork& net, const AssemblyPlan& plan, bool identity_offset,
                                  const Eigen::VectorXd& x, double h);

/// Exact momentum-flux tensor of the Euler vortex at x = (t, x, y).
Eigen::MatrixXd euler_flux_tensor(const EulerVortexConfig& c, const Eigen::VectorXd& x);

/// Pairwise summation in a fixed order.
double pairwise_sum(std::span<const double> v);

}  // namespace rtnn
