#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rtnn/assembly.hpp"
#include "rtnn/jet_batch.hpp"
#include "rtnn/autodiff.hpp"
#include "rtnn/physics.hpp"

namespace rtnn {

/// Coefficient network, slot map and (for MHD) the potential network.
class RtnnModel {
 public:
  RtnnModel() = default;

  /// Fresh model: widths [N, hidden..., slot_count]; the potential network
  /// (MHD only) uses [N, hidden..., 1] and seed + 1.
  RtnnModel(const ProblemSpec& problem, const std::vector<int>& hidden, std::uint64_t seed, bool identity_offset);

  /// Model from existing networks (checkpoint loading).
  RtnnModel(const ProblemSpec& problem, AssemblyPlan plan, bool identity_offset, CoefficientNetwork net,
            std::optional<CoefficientNetwork> potential);

  const ProblemSpec& problem() const { return problem_; }
  const AssemblyPlan& plan() const { return plan_; }
  bool identity_offset() const { return identity_offset_; }
  const CoefficientNetwork& net() const { return net_; }
  CoefficientNetwork& net() { return net_; }
  bool has_potential() const { return potential_.has_value(); }
  const CoefficientNetwork& potential() const { return *potential_; }
  CoefficientNetwork& potential() { return *potential_; }

  Eigen::Index parameter_count() const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& p);

  DfstSample sample(const Eigen::VectorXd& x) const { return assemble(net_, plan_, x, identity_offset_); }
  Eigen::MatrixXd tensor(const Eigen::VectorXd& x) const { return assemble_value(net_, plan_, x, identity_offset_); }

  /// Fields named by problem().field_names() at one point / at every column.
  Eigen::VectorXd predict_fields(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd predict_fields(const Eigen::MatrixXd& points) const;

 private:
  ProblemSpec problem_;
  AssemblyPlan plan_;
  bool identity_offset_ = true;
  CoefficientNetwork net_;
  std::optional<CoefficientNetwork> potential_;
};

/// Input normalization mapping the problem box onto [-1, 1]^N.
void normalize_to_domain(CoefficientNetwork& net, const Box& box);

/// Per-point loss pieces shared by the batched loss and the scalar checks.
/// S entries are first-order jets in all N coordinates (or constants), psi a
/// third-order potential jet (ignored without a potential).
template <typename T>
VectorX<T> point_fields(const ProblemSpec& problem, const MatrixX<Jet<T, 1>>& S, const Jet<T, 3>& psi) {
  VectorX<T> out(4);
  switch (problem.kind) {
    case ProblemKind::EulerVortex: {
      const auto f = extract_euler<Jet<T, 1>>(S, problem.euler.gamma);
      out << f.rho.value(), f.velocity(0).value(), f.velocity(1).value(), f.pressure.value();
      break;
    }
    case ProblemKind::Beltrami: {
      const auto f = extract_ns<Jet<T, 1>>(S);
      out << f.velocity(0).value(), f.velocity(1).value(), f.velocity(2).value(), f.pressure.value();
      break;
    }
    case ProblemKind::Mhd2d: {
      const VectorX<Jet<T, 2>> B = magnetic_field(psi);
      out << S(1, 0).value(), S(2, 0).value(), B(0).value(), B(1).value();
      break;
    }
  }
  return out;
}

template <typename T>
T interior_residual(const ProblemSpec& problem, const MatrixX<Jet<T, 1>>& S, const Jet<T, 3>& psi) {
  switch (problem.kind) {
    case ProblemKind::EulerVortex: {
      const auto f = extract_euler<Jet<T, 1>>(S, problem.euler.gamma);
      const Eigen::Index n = f.sigma_dev.rows();
      MatrixX<T> dev(n, n);
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) dev(i, j) = f.sigma_dev(i, j).value();
      const T rE = energy_residual<T>(f);
      return frobenius_squared<T>(dev) + rE * rE;
    }
    case ProblemKind::Beltrami: {
      const auto f = extract_ns<Jet<T, 1>>(S);
      return frobenius_squared<T>(viscous_residual<T>(f, problem.beltrami.nu));
    }
    case ProblemKind::Mhd2d: {
      const VectorX<Jet<T, 2>> B2 = magnetic_field(psi);
      VectorX<Jet<T, 1>> B(2);
      B << jet_cast<1>(B2(0)), jet_cast<1>(B2(1));
      const auto f = extract_mhd<Jet<T, 1>>(S, B);
      const T visc = frobenius_squared<T>(viscous_residual<T>(f.sigma_dev, f.velocity, problem.mhd.nu));
      const VectorX<T> ind = induction_residual<T>(psi, f.velocity, problem.mhd.eta);
      return visc + ind(0) * ind(0) + ind(1) * ind(1);
    }
  }
  return T(0.0);
}

struct LossWeights {
  double interior = 1.0;
  double boundary = 1.0;
  double initial = 1.0;
  double periodic = 1.0;
};

/// A set of loss terms of one kind. Each term has weight / term_count.
struct LossGroup {
  enum class Kind {
    Interior,      ///< PDE residual at each point
    FieldTarget,   ///< squared mismatch of point_fields against targets
    PeriodicPair,  ///< squared mismatch of S (upper triangle) and B between paired points
    TensorTarget,  ///< ||S - target||_F^2, targets stored as N*N column-major
  };
  Kind kind = Kind::Interior;
  std::string name;
  Eigen::MatrixXd points;
  Eigen::MatrixXd partners;  ///< PeriodicPair only
  Eigen::MatrixXd targets;
  double weight = 1.0;

  Eigen::Index term_count() const { return points.cols(); }
};

/// Training loss over the flat model parameters. Network jets are pushed
/// through in batches, the per-point loss head is differentiated on a tape,
/// and parameter adjoints are pulled back through the assembly and networks.
///
/// Terms are reduced by pairwise summation in group, chunk and point order,
/// so repeated evaluations are bit-identical. Evaluations that hit the density
/// floor or produce non-finite values return +inf.
class RtnnLoss : public LossProgram {
 public:
  RtnnLoss(RtnnModel model, std::vector<LossGroup> groups, int chunk_size = 256);

  static RtnnLoss for_problem(const RtnnModel& model, const CollocationSet& colloc, const LossWeights& w = {},
                              int chunk_size = 256);
  /// Tensor least squares onto targets (N*N x P, column-major per point).
  static RtnnLoss tensor_regression(const RtnnModel& model, const Eigen::MatrixXd& points,
                                    const Eigen::MatrixXd& targets, int chunk_size = 256);

  Eigen::Index parameter_count() const override { return model_.parameter_count(); }
  double value(const Eigen::VectorXd& params) const override;
  double value_and_gradient(const Eigen::VectorXd& params, Eigen::VectorXd& gradient) const override;

  /// Weighted loss of every group at params, in group order.
  std::vector<double> group_values(const Eigen::VectorXd& params) const;
  const std::vector<LossGroup>& groups() const { return groups_; }

 private:
  double evaluate(const Eigen::VectorXd& params, Eigen::VectorXd* gradient, std::vector<double>* per_group) const;

  mutable RtnnModel model_;
  std::vector<LossGroup> groups_;
  int chunk_size_;
  mutable ad::Tape tape_;
  mutable NetworkJetPass pass_, psi_pass_;
  mutable JetBatch c_bar_;
};

}  // namespace rtnn
