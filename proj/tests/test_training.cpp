#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fd_oracle.hpp"
#include "rtnn/training.hpp"

using namespace rtnn;
using rtnn::test::rel_err;

namespace {

ProblemSpec problem_of(ProblemKind k) {
  ProblemSpec p;
  p.kind = k;
  return p;
}

CollocationCounts small_counts(const ProblemSpec& p) {
  CollocationCounts c;
  c.interior = 8;
  c.boundary = p.periodic() ? 0 : 5;
  c.initial = 5;
  c.periodic = p.periodic() ? 5 : 0;
  return c;
}

/// First-order jets of S and the third-order potential jet at x, computed by
/// the scalar (non-batched) path.
std::pair<MatrixX<Jet<double, 1>>, Jet3> scalar_jets(const RtnnModel& m, const Eigen::VectorXd& x) {
  const DfstSample s = m.sample(x);
  const int N = s.dim;
  MatrixX<Jet<double, 1>> S(N, N);
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b) {
      Jet<double, 1> j(s.S(a, b));
      j.set_nvars(N);
      for (int e = 0; e < N; ++e) j.grad(e) = s.dS[e](a, b);
      S(a, b) = j;
    }
  Jet3 psi(0.0);
  if (m.has_potential()) psi = forward_jet<3>(m.potential(), std::span<const Jet3>(seed_jets<3>(x)))[0];
  return {S, psi};
}

/// Reference loss of each group by direct summation over points.
std::vector<double> reference_groups(const RtnnModel& m, const std::vector<LossGroup>& groups) {
  std::vector<double> out;
  for (const auto& g : groups) {
    double s = 0.0;
    for (Eigen::Index p = 0; p < g.points.cols(); ++p) {
      const auto [S, psi] = scalar_jets(m, g.points.col(p));
      switch (g.kind) {
        case LossGroup::Kind::Interior: s += interior_residual<double>(m.problem(), S, psi); break;
        case LossGroup::Kind::FieldTarget:
          s += (point_fields<double>(m.problem(), S, psi) - g.targets.col(p)).squaredNorm();
          break;
        case LossGroup::Kind::PeriodicPair: {
          const auto [S2, psi2] = scalar_jets(m, g.partners.col(p));
          for (Eigen::Index b = 0; b < S.cols(); ++b)
            for (Eigen::Index a = 0; a <= b; ++a) s += std::pow(S(a, b).value() - S2(a, b).value(), 2);
          const auto B1 = magnetic_field(psi), B2 = magnetic_field(psi2);
          for (int i = 0; i < 2; ++i) s += std::pow(B1(i).value() - B2(i).value(), 2);
          break;
        }
        case LossGroup::Kind::TensorTarget: {
          const Eigen::MatrixXd T = Eigen::Map<const Eigen::MatrixXd>(g.targets.col(p).data(), S.rows(), S.cols());
          for (Eigen::Index i = 0; i < S.size(); ++i) s += std::pow(S(i).value() - T(i), 2);
          break;
        }
      }
    }
    out.push_back(g.weight * s / static_cast<double>(g.term_count()));
  }
  return out;
}

class PerProblem : public ::testing::TestWithParam<ProblemKind> {};

}  // namespace

TEST(Model, SlotCountsAndPotential) {
  const RtnnModel e(problem_of(ProblemKind::EulerVortex), {8}, 1, true);
  EXPECT_EQ(e.plan().slot_count(), 6);
  EXPECT_FALSE(e.has_potential());
  const RtnnModel b(problem_of(ProblemKind::Beltrami), {8}, 1, true);
  EXPECT_EQ(b.plan().slot_count(), 15);
  const RtnnModel h(problem_of(ProblemKind::Mhd2d), {8}, 1, true);
  EXPECT_EQ(h.plan().slot_count(), 3);
  ASSERT_TRUE(h.has_potential());
  EXPECT_EQ(h.potential().output_width(), 1);
  EXPECT_EQ(h.potential().seed(), 2u);
  EXPECT_EQ(h.parameter_count(), h.net().parameter_count() + h.potential().parameter_count());
}

TEST(Model, ParameterRoundTrip) {
  RtnnModel m(problem_of(ProblemKind::Mhd2d), {6, 6}, 3, true);
  const Eigen::VectorXd p = Eigen::VectorXd::LinSpaced(m.parameter_count(), -1, 1);
  m.set_parameters(p);
  EXPECT_EQ(m.parameters(), p);
  EXPECT_THROW(m.set_parameters(Eigen::VectorXd::Zero(3)), Error);
}

TEST(Model, NormalizationMapsBoxToUnitCube) {
  CoefficientNetwork net = init_network({3, 4, 1}, 0);
  Box box{Eigen::Vector3d(0, 0, -2), Eigen::Vector3d(1, 5, 2)};
  normalize_to_domain(net, box);
  const Eigen::ArrayXd lo = (box.lo - net.input_offset()).array() * net.input_scale().array();
  const Eigen::ArrayXd hi = (box.hi - net.input_offset()).array() * net.input_scale().array();
  EXPECT_TRUE(lo.isApprox(Eigen::ArrayXd::Constant(3, -1.0)));
  EXPECT_TRUE(hi.isApprox(Eigen::ArrayXd::Constant(3, 1.0)));
}

TEST_P(PerProblem, BatchedLossMatchesScalarPath) {
  const ProblemSpec p = problem_of(GetParam());
  const RtnnModel m(p, {10, 10}, 4, true);
  const CollocationSet cs = sample_collocation(p, small_counts(p), 5);
  const LossWeights w{1.0, 2.0, 0.5, 3.0};
  const RtnnLoss loss = RtnnLoss::for_problem(m, cs, w, 3);
  const auto got = loss.group_values(m.parameters());
  const auto ref = reference_groups(m, loss.groups());
  ASSERT_EQ(got.size(), ref.size());
  double total = 0.0;
  for (std::size_t g = 0; g < got.size(); ++g) {
    EXPECT_LE(rel_err(got[g], ref[g], 1e-12), 1e-12) << loss.groups()[g].name;
    total += ref[g];
  }
  EXPECT_LE(rel_err(loss.value(m.parameters()), total), 1e-12);
}

TEST_P(PerProblem, GradientMatchesFiniteDifferences) {
  const ProblemSpec p = problem_of(GetParam());
  const RtnnModel m(p, {6, 6}, 7, true);
  const CollocationSet cs = sample_collocation(p, small_counts(p), 8);
  const RtnnLoss loss = RtnnLoss::for_problem(m, cs, {}, 4);
  const Eigen::VectorXd x = m.parameters();
  Eigen::VectorXd g;
  loss.value_and_gradient(x, g);
  const Eigen::VectorXd fd = test::fd_gradient([&](const Eigen::VectorXd& q) { return loss.value(q); }, x, 1e-6);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) worst = std::max(worst, rel_err(g(i), fd(i)));
  EXPECT_LE(worst, 1e-6);
}

TEST_P(PerProblem, ChunkSizeDoesNotChangeTheLoss) {
  const ProblemSpec p = problem_of(GetParam());
  const RtnnModel m(p, {8}, 9, true);
  const CollocationSet cs = sample_collocation(p, small_counts(p), 10);
  Eigen::VectorXd g1, g2;
  const double a = RtnnLoss::for_problem(m, cs, {}, 1).value_and_gradient(m.parameters(), g1);
  const double b = RtnnLoss::for_problem(m, cs, {}, 256).value_and_gradient(m.parameters(), g2);
  EXPECT_LE(rel_err(a, b), 1e-13);
  EXPECT_LE((g1 - g2).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, g2.cwiseAbs().maxCoeff()));
}

INSTANTIATE_TEST_SUITE_P(Problems, PerProblem,
                         ::testing::Values(ProblemKind::EulerVortex, ProblemKind::Beltrami, ProblemKind::Mhd2d));

TEST(Loss, DeviatoricHeadGradientOnSmallNetwork) {
  // Euler interior loss only, 2 hidden layers, 8 points.
  const ProblemSpec p = problem_of(ProblemKind::EulerVortex);
  const RtnnModel m(p, {5, 5}, 11, true);
  LossGroup g;
  g.kind = LossGroup::Kind::Interior;
  g.name = "interior";
  std::mt19937_64 rng(12);
  g.points.resize(3, 8);
  for (int k = 0; k < 8; ++k) g.points.col(k) = test::uniform_vector(rng, 3, 0.0, 1.0);
  const RtnnLoss loss(m, {g});
  Eigen::VectorXd grad;
  loss.value_and_gradient(m.parameters(), grad);
  const Eigen::VectorXd fd =
      test::fd_gradient([&](const Eigen::VectorXd& q) { return loss.value(q); }, m.parameters(), 1e-6);
  for (Eigen::Index i = 0; i < grad.size(); ++i) EXPECT_LE(rel_err(grad(i), fd(i)), 1e-6) << i;
}

TEST(Loss, RepeatedEvaluationIsBitIdentical) {
  const ProblemSpec p = problem_of(ProblemKind::Beltrami);
  const RtnnModel m(p, {8}, 13, true);
  const RtnnLoss loss = RtnnLoss::for_problem(m, sample_collocation(p, small_counts(p), 14), {}, 3);
  Eigen::VectorXd g1, g2;
  EXPECT_EQ(loss.value_and_gradient(m.parameters(), g1), loss.value_and_gradient(m.parameters(), g2));
  EXPECT_EQ(g1, g2);
  EXPECT_EQ(loss.value(m.parameters()), loss.value_and_gradient(m.parameters(), g1));
}

TEST(Loss, DensityUnderflowGivesInfinity) {
  const ProblemSpec p = problem_of(ProblemKind::EulerVortex);
  RtnnModel m(p, {4}, 15, false);
  m.set_parameters(Eigen::VectorXd::Zero(m.parameter_count()));
  const RtnnLoss loss = RtnnLoss::for_problem(m, sample_collocation(p, small_counts(p), 16));
  Eigen::VectorXd g;
  EXPECT_EQ(loss.value(m.parameters()), std::numeric_limits<double>::infinity());
  EXPECT_EQ(loss.value_and_gradient(m.parameters(), g), std::numeric_limits<double>::infinity());
}

TEST(Loss, FieldTargetsAgreeWithPredictions) {
  const ProblemSpec p = problem_of(ProblemKind::EulerVortex);
  const RtnnModel m(p, {8}, 17, true);
  const CollocationSet cs = sample_collocation(p, small_counts(p), 18);
  const RtnnLoss loss = RtnnLoss::for_problem(m, cs, {0.0, 1.0, 1.0, 0.0});
  const double bi = boundary_and_initial_losses([&](const Eigen::VectorXd& x) { return m.predict_fields(x); }, cs);
  EXPECT_LE(rel_err(loss.value(m.parameters()), bi), 1e-12);
  EXPECT_EQ(m.predict_fields(cs.initial).col(2), m.predict_fields(Eigen::VectorXd(cs.initial.col(2))));
}

TEST(Loss, TensorRegression) {
  const ProblemSpec p = problem_of(ProblemKind::EulerVortex);
  const RtnnModel m(p, {6}, 19, true);
  std::mt19937_64 rng(20);
  Eigen::MatrixXd pts(3, 6), targets(9, 6);
  for (int k = 0; k < 6; ++k) {
    pts.col(k) = test::uniform_vector(rng, 3, 0.0, 1.0);
    targets.col(k) = Eigen::Map<const Eigen::VectorXd>(euler_flux_tensor(p.euler, pts.col(k)).data(), 9);
  }
  const RtnnLoss loss = RtnnLoss::tensor_regression(m, pts, targets, 4);
  EXPECT_LE(rel_err(loss.value(m.parameters()), reference_groups(m, loss.groups())[0]), 1e-12);
  Eigen::VectorXd g;
  loss.value_and_gradient(m.parameters(), g);
  const Eigen::VectorXd fd =
      test::fd_gradient([&](const Eigen::VectorXd& q) { return loss.value(q); }, m.parameters(), 1e-6);
  for (Eigen::Index i = 0; i < g.size(); ++i) EXPECT_LE(rel_err(g(i), fd(i)), 1e-6) << i;
}
