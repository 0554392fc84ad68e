#include <gtest/gtest.h>

#include <random>

#include "fd_oracle.hpp"
#include "rtnn/assembly.hpp"

using namespace rtnn;

namespace {

/// Single-slot N = 2 assembly of a coefficient given as a jet in (t, x).
Eigen::MatrixXd assemble_one(const Jet3& c, bool offset) {
  const AssemblyPlan plan = AssemblyPlan::full(2);
  return assemble_from_jets<3>(plan, std::span<const Jet3>(&c, 1), offset).S;
}

}  // namespace

TEST(Mask, ThreeDimensions) {
  const SlotMask m = incompressibility_mask(enumerate_two_forms(3));
  EXPECT_EQ(m.masked, (std::vector<Slot>{{1, 1}, {1, 2}, {2, 2}}));
  EXPECT_EQ(m.active, (std::vector<Slot>{{1, 3}, {2, 3}, {3, 3}}));
  EXPECT_FALSE(m.degenerate);
}

TEST(Mask, TwoDimensionsIsDegenerate) {
  const SlotMask m = incompressibility_mask(enumerate_two_forms(2));
  EXPECT_TRUE(m.degenerate);
  EXPECT_TRUE(m.active.empty());
  EXPECT_THROW(AssemblyPlan::incompressible(2), Error);
}

TEST(Mask, FourDimensions) {
  const SlotMask m = incompressibility_mask(enumerate_two_forms(4));
  EXPECT_EQ(m.masked.size(), 6u);
  EXPECT_EQ(m.active.size(), 15u);
}

TEST(Plan, EntryIndexing) {
  const AssemblyPlan p = AssemblyPlan::full(3);
  EXPECT_EQ(p.entry_count(), 6);
  EXPECT_EQ(p.slot_count(), 6);
  for (int k = 0; k < p.entry_count(); ++k) {
    const auto [a, b] = p.entry(k);
    EXPECT_LE(a, b);
    EXPECT_EQ(p.entry_index(a, b), k);
    EXPECT_EQ(p.entry_index(b, a), k);
  }
  EXPECT_THROW(p.entry_index(0, 3), Error);
  EXPECT_THROW(AssemblyPlan(enumerate_two_forms(3), {{2, 1}}), Error);
  EXPECT_THROW(AssemblyPlan::full(5), Error);
}

TEST(Assemble, SquareOfSpaceCoordinate) {
  const Jet3 x = jet_variable(1, 0.7, 2);
  const Eigen::MatrixXd S = assemble_one(x * x, false);
  EXPECT_EQ(S, (Eigen::Matrix2d() << 4, 0, 0, 0).finished());
}

TEST(Assemble, MixedProduct) {
  const Jet3 t = jet_variable(0, -0.3, 2), x = jet_variable(1, 0.9, 2);
  const Eigen::MatrixXd S = assemble_one(t * x, false);
  EXPECT_EQ(S, (Eigen::Matrix2d() << 0, -2, -2, 0).finished());
}

TEST(Assemble, IdentityOffsetAddsExactlyIdentity) {
  std::mt19937_64 rng(1);
  const auto net = init_network({3, 8, 6}, 3);
  const AssemblyPlan plan = AssemblyPlan::full(3);
  for (int k = 0; k < 5; ++k) {
    const Eigen::VectorXd x = test::uniform_vector(rng, 3, -1, 1);
    const Eigen::MatrixXd d = assemble(net, plan, x, true).S - assemble(net, plan, x, false).S;
    EXPECT_EQ(d, Eigen::MatrixXd::Identity(3, 3));
  }
}

TEST(Assemble, IsSymmetricAndValueOnlyAgrees) {
  const auto net = init_network({4, 10, 21}, 5);
  const AssemblyPlan plan = AssemblyPlan::full(4);
  const Eigen::Vector4d x(0.1, -0.2, 0.3, 0.4);
  const DfstSample s = assemble(net, plan, x, true);
  EXPECT_EQ(s.S, s.S.transpose());
  EXPECT_EQ(s.dS.size(), 4u);
  EXPECT_EQ(assemble_value(net, plan, x, true), s.S);
}

TEST(Assemble, CoefficientCountChecked) {
  const AssemblyPlan plan = AssemblyPlan::full(3);
  std::vector<Jet3> c(2, jet_variable(0, 0.0, 3));
  EXPECT_THROW(assemble_from_jets<3>(plan, std::span<const Jet3>(c), false), Error);
  const auto net = init_network({3, 4, 5}, 0);
  EXPECT_THROW(assemble(net, plan, Eigen::Vector3d::Zero(), false), Error);
}

TEST(Assemble, IncompressibleHasUnitDensity) {
  const auto net = init_network({3, 12, 3}, 7);
  const AssemblyPlan plan = AssemblyPlan::incompressible(3);
  std::mt19937_64 rng(2);
  for (int k = 0; k < 10; ++k) {
    const DfstSample s = assemble(net, plan, test::uniform_vector(rng, 3, -2, 2), true);
    EXPECT_EQ(s.S(0, 0), 1.0);
    for (const auto& d : s.dS) EXPECT_EQ(d(0, 0), 0.0);
  }
}

TEST(Divergence, AnalyticDerivativesGiveZero) {
  for (int N = 2; N <= 4; ++N) {
    const int m = N * (N - 1) / 2;
    const auto net = init_network({N, 16, 16, m * (m + 1) / 2}, 11);
    const AssemblyPlan plan = AssemblyPlan::full(N);
    std::mt19937_64 rng(3);
    for (int k = 0; k < 5; ++k) {
      const DfstSample s = assemble(net, plan, test::uniform_vector(rng, N, -1, 1), false);
      for (int b = 0; b < N; ++b) {
        double div = 0;
        for (int c = 0; c < N; ++c) div += s.dS[c](b, c);
        EXPECT_NEAR(div, 0.0, 1e-12);
      }
    }
  }
}

TEST(Divergence, CubicCoefficientsAreExact) {
  std::mt19937_64 rng(4);
  for (int N = 2; N <= 4; ++N) {
    const AssemblyPlan plan = AssemblyPlan::full(N);
    test::CubicCoefficients cc{N, {}};
    const int nmono = N * (N + 1) * (N + 2) / 6 + N * (N + 1) / 2;
    for (int s = 0; s < plan.slot_count(); ++s) cc.coeffs.push_back(test::uniform_vector(rng, nmono, -1, 1));
    const TensorField S = [&](const Eigen::VectorXd& x) {
      const auto j = cc.jets(x);
      return assemble_from_jets<3>(plan, std::span<const Jet3>(j), true).S;
    };
    const Eigen::VectorXd div = divergence_fd(S, test::uniform_vector(rng, N, -1, 1), 1e-2);
    EXPECT_LE(div.cwiseAbs().maxCoeff(), 1e-10) << N;
  }
}

TEST(Divergence, NetworkIsSecondOrderSmall) {
  const auto net = init_network({3, 20, 20, 6}, 13);
  const AssemblyPlan plan = AssemblyPlan::full(3);
  const Eigen::Vector3d x(0.2, -0.4, 0.6);
  const double e1 = divergence_fd(net, plan, x, 1e-3, true).cwiseAbs().maxCoeff();
  const double e2 = divergence_fd(net, plan, x, 5e-4, true).cwiseAbs().maxCoeff();
  EXPECT_LE(e1, 1e-6);
  EXPECT_GT(e1 / e2, 3.0);
  EXPECT_LT(e1 / e2, 5.0);
}

TEST(Divergence, ZeroNetwork) {
  CoefficientNetwork net = init_network({3, 5, 6}, 0);
  net.set_parameters(Eigen::VectorXd::Zero(net.parameter_count()));
  EXPECT_TRUE(divergence_fd(net, AssemblyPlan::full(3), Eigen::Vector3d(0.1, 0.2, 0.3), 1e-3, true).isZero(0.0));
}

TEST(Extract, IdentityIsUniformGas) {
  const double gamma = 1.4;
  const auto f = extract_euler<double>(Eigen::MatrixXd::Identity(3, 3), gamma);
  EXPECT_EQ(f.rho, 1.0);
  EXPECT_TRUE(f.velocity.isZero(0.0));
  EXPECT_EQ(f.pressure, 1.0);
  EXPECT_TRUE(f.sigma_dev.isZero(0.0));
  EXPECT_DOUBLE_EQ(f.energy, 1.0 / (gamma - 1.0));
}

TEST(Extract, EulerRoundTripsFlux) {
  const double rho = 1.3, p = 0.8;
  const Eigen::Vector2d u(0.4, -0.7);
  Eigen::Matrix3d S;
  S(0, 0) = rho;
  S.block<2, 1>(1, 0) = rho * u;
  S.block<1, 2>(0, 1) = rho * u.transpose();
  S.block<2, 2>(1, 1) = rho * u * u.transpose() + p * Eigen::Matrix2d::Identity();
  const auto f = extract_euler<double>(S, 1.4);
  EXPECT_NEAR(f.rho, rho, 1e-15);
  EXPECT_NEAR((f.velocity - u).norm(), 0.0, 1e-15);
  EXPECT_NEAR(f.pressure, p, 1e-15);
  EXPECT_NEAR(f.sigma_dev.norm(), 0.0, 1e-15);
  EXPECT_NEAR(f.energy, p / 0.4 + 0.5 * rho * u.squaredNorm(), 1e-14);
}

TEST(Extract, DensityFloor) {
  Eigen::Matrix2d S = Eigen::Matrix2d::Identity();
  S(0, 0) = 1e-9;
  try {
    extract_euler<double>(S, 1.4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DensityUnderflow);
  }
  S(0, 0) = -1.0;
  EXPECT_THROW(extract_euler<double>(S, 1.4), Error);
}

TEST(Extract, NavierStokes) {
  Eigen::Matrix3d S;
  S << 1, 0.5, -0.2, 0.5, 2.0, 0.1, -0.2, 0.1, 3.0;
  const auto f = extract_ns<double>(S);
  EXPECT_EQ(f.velocity, Eigen::Vector2d(0.5, -0.2));
  const Eigen::Matrix2d sigma = S.block<2, 2>(1, 1) - f.velocity * f.velocity.transpose();
  EXPECT_LE((f.sigma - sigma).norm(), 1e-15);
  EXPECT_NEAR(f.pressure, sigma.trace() / 2, 1e-15);
}

TEST(Extract, MaxwellStressFromPotential) {
  const Jet3 x = jet_variable(1, 1.0, 3);
  const auto B = magnetic_field(x * x);
  const Eigen::Vector2d b(B(0).value(), B(1).value());
  EXPECT_EQ(b, Eigen::Vector2d(0.0, -2.0));
  EXPECT_EQ(maxwell_stress<double>(b), (Eigen::Matrix2d() << 2, 0, 0, -2).finished());
}

TEST(Extract, MaxwellStressIsTraceFree2D) {
  const Eigen::Vector2d b(0.3, -1.1);
  const Eigen::Matrix2d M = maxwell_stress<double>(b);
  EXPECT_NEAR(M.trace(), 0.0, 1e-15);
  EXPECT_EQ(M, M.transpose());
}

TEST(Extract, MhdSubtractsMaxwell) {
  Eigen::Matrix3d S;
  S << 1, 0.2, 0.3, 0.2, 1.5, 0.4, 0.3, 0.4, 0.9;
  const Eigen::Vector2d b(0.6, -0.1);
  const auto f = extract_mhd<double>(S, b);
  const Eigen::Vector2d u(0.2, 0.3);
  const Eigen::Matrix2d expect = S.block<2, 2>(1, 1) - u * u.transpose() - maxwell_stress<double>(b);
  EXPECT_LE((f.sigma - expect).norm(), 1e-15);
  EXPECT_EQ(f.B, b);
}
