#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <vector>

#include "rtnn/jet.hpp"
#include "rtnn/network.hpp"
#include "rtnn/tensor_basis.hpp"

namespace rtnn {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Slots removed by the incompressibility mask and the ones left to the network.
struct SlotMask {
  std::vector<Slot> masked;
  std::vector<Slot> active;
  /// No active slot is left (N = 2).
  bool degenerate = false;
};

/// Masks every slot (i, j) whose two forms both contain index 0.
SlotMask incompressibility_mask(const TwoFormBasis& basis);

/// Precomputed contraction S_ab = sum_s sum_cd T^(s)[a][c][b][d] Hess(c_s)[c][d]
/// for a fixed list of active slots, stored sparsely over the upper triangle.
class AssemblyPlan {
 public:
  struct Term {
    int slot;  ///< position in slots()
    int c;     ///< c <= d
    int d;
    double coefficient;
  };

  AssemblyPlan() = default;
  AssemblyPlan(const TwoFormBasis& basis, std::vector<Slot> active_slots);

  /// Plan over all m(m+1)/2 slots of the lexicographic basis.
  static AssemblyPlan full(int dim);
  /// Plan over the slots that survive the incompressibility mask.
  static AssemblyPlan incompressible(int dim);

  int dim() const { return dim_; }
  const TwoFormBasis& basis() const { return basis_; }
  const std::vector<Slot>& slots() const { return slots_; }
  int slot_count() const { return static_cast<int>(slots_.size()); }

  /// Number of upper-triangle entries, N(N+1)/2.
  int entry_count() const { return dim_ * (dim_ + 1) / 2; }
  /// Upper-triangle entry k -> (a, b), a <= b; ordered row by row.
  std::array<int, 2> entry(int k) const { return entries_[static_cast<std::size_t>(k)]; }
  int entry_index(int a, int b) const;

  const std::vector<Term>& terms(int entry) const { return terms_[static_cast<std::size_t>(entry)]; }

 private:
  int dim_ = 0;
  TwoFormBasis basis_;
  std::vector<Slot> slots_;
  std::vector<std::array<int, 2>> entries_;
  std::vector<std::vector<Term>> terms_;
};

/// Assembled tensor at one point.
struct DfstSample {
  int dim = 0;
  Eigen::VectorXd x;
  Eigen::MatrixXd S;
  /// dS[e](a, b) = d_e S_ab; empty unless third-order jets were available.
  std::vector<Eigen::MatrixXd> dS;
};

/// Assembles S (and dS for order-3 jets) from coefficient jets, one per slot in
/// plan.slots(). Zero terms are skipped, so entries with no contribution stay
/// exactly 0 (or exactly 1 on the diagonal with the identity offset).
template <int Order>
DfstSample assemble_from_jets(const AssemblyPlan& plan, std::span<const Jet<double, Order>> coefficients,
                              bool identity_offset) {
  static_assert(Order >= 2, "assembly needs coefficient Hessians");
  if (static_cast<int>(coefficients.size()) != plan.slot_count())
    throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(plan.slot_count()) + " coefficients, got " +
                                              std::to_string(coefficients.size()));
  const int N = plan.dim();
  for (const auto& c : coefficients)
    if (c.nvars() != N && c.nvars() != 0)
      throw Error(ErrorCode::ShapeMismatch, "coefficient jets must be taken in all " + std::to_string(N) + " coordinates");
  DfstSample out;
  out.dim = N;
  out.S = Eigen::MatrixXd::Zero(N, N);
  if constexpr (Order >= 3) out.dS.assign(static_cast<std::size_t>(N), Eigen::MatrixXd::Zero(N, N));
  for (int k = 0; k < plan.entry_count(); ++k) {
    const auto [a, b] = plan.entry(k);
    double s = 0.0;
    for (const auto& t : plan.terms(k)) {
      const auto& c = coefficients[static_cast<std::size_t>(t.slot)];
      if (c.nvars() == 0) continue;
      s += t.coefficient * c.d2(t.c, t.d);
      if constexpr (Order >= 3)
        for (int e = 0; e < N; ++e) out.dS[static_cast<std::size_t>(e)](a, b) += t.coefficient * c.d3(e, t.c, t.d);
    }
    if (identity_offset && a == b) s += 1.0;
    out.S(a, b) = s;
    out.S(b, a) = s;
    if constexpr (Order >= 3)
      for (int e = 0; e < N; ++e) out.dS[static_cast<std::size_t>(e)](b, a) = out.dS[static_cast<std::size_t>(e)](a, b);
  }
  return out;
}

/// Evaluates the network at x with third-order jets and assembles S and dS.
DfstSample assemble(const CoefficientNetwork& net, const AssemblyPlan& plan, const Eigen::VectorXd& x,
                    bool identity_offset);

/// Value-only assembly (second-order jets).
Eigen::MatrixXd assemble_value(const CoefficientNetwork& net, const AssemblyPlan& plan, const Eigen::VectorXd& x,
                               bool identity_offset);

using TensorField = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

/// Central-difference row divergence sum_c d_c S_bc for every row b.
Eigen::VectorXd divergence_fd(const TensorField& S, const Eigen::VectorXd& x, double h);
Eigen::VectorXd divergence_fd(const CoefficientNetwork& net, const AssemblyPlan& plan, const Eigen::VectorXd& x,
                              double h, bool identity_offset);

inline constexpr double kDefaultRhoMin = 1e-6;

template <typename Scalar>
struct EulerFields {
  Scalar rho;
  VectorX<Scalar> momentum;
  VectorX<Scalar> velocity;
  MatrixX<Scalar> sigma;
  Scalar pressure;
  MatrixX<Scalar> sigma_dev;
  Scalar energy;
};

template <typename Scalar>
struct NsFields {
  VectorX<Scalar> velocity;
  MatrixX<Scalar> sigma;
  Scalar pressure;
  MatrixX<Scalar> sigma_dev;
};

template <typename Scalar>
struct MhdFields {
  VectorX<Scalar> velocity;
  VectorX<Scalar> B;
  MatrixX<Scalar> maxwell;
  MatrixX<Scalar> sigma;
  Scalar pressure;
  MatrixX<Scalar> sigma_dev;
};

namespace detail {

template <typename Scalar>
void split_pressure(const MatrixX<Scalar>& sigma, Scalar& p, MatrixX<Scalar>& dev) {
  const Eigen::Index n = sigma.rows();
  Scalar tr = sigma(0, 0);
  for (Eigen::Index i = 1; i < n; ++i) tr += sigma(i, i);
  p = tr / static_cast<double>(n);
  dev = sigma;
  for (Eigen::Index i = 0; i < n; ++i) dev(i, i) = sigma(i, i) - p;
}

}  // namespace detail

/// rho = S00, momentum = S[1:,0], sigma = S[1:,1:] - m m^T / rho,
/// p = tr(sigma) / n, E = p / (gamma - 1) + rho |u|^2 / 2.
template <typename Scalar>
EulerFields<Scalar> extract_euler(const MatrixX<Scalar>& S, double gamma, double rho_min = kDefaultRhoMin) {
  if (S.rows() != S.cols() || S.rows() < 2) throw Error(ErrorCode::ShapeMismatch, "S must be square with N >= 2");
  const Eigen::Index n = S.rows() - 1;
  EulerFields<Scalar> f;
  f.rho = S(0, 0);
  if (!(value_of(f.rho) > rho_min))
    throw Error(ErrorCode::DensityUnderflow, "density " + std::to_string(value_of(f.rho)) + " at or below floor");
  f.momentum.resize(n);
  f.velocity.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    f.momentum(i) = S(i + 1, 0);
    f.velocity(i) = f.momentum(i) / f.rho;
  }
  f.sigma.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      f.sigma(i, j) = S(i + 1, j + 1) - f.momentum(i) * f.velocity(j);
      f.sigma(j, i) = f.sigma(i, j);
    }
  detail::split_pressure(f.sigma, f.pressure, f.sigma_dev);
  Scalar ke = f.velocity(0) * f.velocity(0);
  for (Eigen::Index i = 1; i < n; ++i) ke += f.velocity(i) * f.velocity(i);
  f.energy = f.pressure / (gamma - 1.0) + 0.5 * f.rho * ke;
  return f;
}

/// Unit density: u = S[1:,0], sigma = S[1:,1:] - u u^T.
template <typename Scalar>
NsFields<Scalar> extract_ns(const MatrixX<Scalar>& S) {
  if (S.rows() != S.cols() || S.rows() < 2) throw Error(ErrorCode::ShapeMismatch, "S must be square with N >= 2");
  const Eigen::Index n = S.rows() - 1;
  NsFields<Scalar> f;
  f.velocity.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) f.velocity(i) = S(i + 1, 0);
  f.sigma.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      f.sigma(i, j) = S(i + 1, j + 1) - f.velocity(i) * f.velocity(j);
      f.sigma(j, i) = f.sigma(i, j);
    }
  detail::split_pressure(f.sigma, f.pressure, f.sigma_dev);
  return f;
}

/// Maxwell stress |B|^2 / 2 I - B B^T, symmetric by construction.
template <typename Scalar>
MatrixX<Scalar> maxwell_stress(const VectorX<Scalar>& B) {
  const Eigen::Index n = B.size();
  Scalar b2 = B(0) * B(0);
  for (Eigen::Index i = 1; i < n; ++i) b2 += B(i) * B(i);
  MatrixX<Scalar> M(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      M(i, j) = (i == j ? 0.5 * b2 : Scalar(0.0)) - B(i) * B(j);
      M(j, i) = M(i, j);
    }
  return M;
}

/// Fluid stress sigma = S[1:,1:] - u u^T - M for a given magnetic field B.
template <typename Scalar>
MhdFields<Scalar> extract_mhd(const MatrixX<Scalar>& S, const VectorX<Scalar>& B) {
  if (S.rows() != 3 || S.cols() != 3) throw Error(ErrorCode::ShapeMismatch, "2D MHD needs a 3x3 space-time tensor");
  if (B.size() != 2) throw Error(ErrorCode::ShapeMismatch, "2D MHD needs a 2-component B");
  MhdFields<Scalar> f;
  f.velocity.resize(2);
  for (Eigen::Index i = 0; i < 2; ++i) f.velocity(i) = S(i + 1, 0);
  f.B = B;
  f.maxwell = maxwell_stress(B);
  f.sigma.resize(2, 2);
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index j = i; j < 2; ++j) {
      f.sigma(i, j) = S(i + 1, j + 1) - f.velocity(i) * f.velocity(j) - f.maxwell(i, j);
      f.sigma(j, i) = f.sigma(i, j);
    }
  detail::split_pressure(f.sigma, f.pressure, f.sigma_dev);
  return f;
}

/// B = (d_y psi, -d_x psi) for a potential jet in (t, x, y); the result keeps
/// one order less than psi.
template <typename Scalar, int Order>
VectorX<Jet<Scalar, Order - 1>> magnetic_field(const Jet<Scalar, Order>& psi) {
  static_assert(Order >= 2, "B needs at least second-order potential jets");
  VectorX<Jet<Scalar, Order - 1>> B(2);
  const int nv = psi.nvars();
  for (int comp = 0; comp < 2; ++comp) {
    const int dir = comp == 0 ? 2 : 1;  // d_y for Bx, d_x for By
    const double sign = comp == 0 ? 1.0 : -1.0;
    Jet<Scalar, Order - 1> b(sign * psi.d(dir));
    b.set_nvars(nv);
    for (int i = 0; i < nv; ++i) {
      if constexpr (Order - 1 >= 1) b.grad(i) = sign * psi.d2(dir, i);
    }
    if constexpr (Order - 1 >= 2)
      for (int q = 0; q < jet_hess_size(nv); ++q) {
        const int i = kJetLayout.pairs[q][0], j = kJetLayout.pairs[q][1];
        b.hess(q) = sign * psi.d3(dir, i, j);
      }
    B(comp) = b;
  }
  return B;
}

/// MHD fields at x from the coefficient and potential networks.
MhdFields<double> extract_mhd(const DfstSample& sample, const CoefficientNetwork& psi_net, const Eigen::VectorXd& x);

}  // namespace rtnn
