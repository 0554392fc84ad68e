#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "rtnn/oracle.hpp"

using namespace rtnn;
using std::numbers::pi;

namespace {

PeriodicGridField constant_field(int N, int n, const Eigen::MatrixXd& S) {
  PeriodicGridField g(std::vector<int>(static_cast<std::size_t>(N), n), std::vector<double>(static_cast<std::size_t>(N), 1.0));
  for (Eigen::Index p = 0; p < g.point_count(); ++p) g.set_tensor(p, S);
  return g;
}

}  // namespace

TEST(Grid, LayoutAndCoordinates) {
  PeriodicGridField g({4, 8}, {2.0, 1.0});
  EXPECT_EQ(g.point_count(), 32);
  EXPECT_EQ(g.component_count(), 3);
  EXPECT_EQ(g.component_index(1, 0), g.component_index(0, 1));
  EXPECT_EQ(g.coordinates(9), Eigen::Vector2d(0.5, 0.125));
  EXPECT_DOUBLE_EQ(g.spacing(0), 0.5);
  Eigen::Matrix2d S;
  S << 1, 2, 2, 3;
  g.set_tensor(5, S);
  EXPECT_EQ(g.tensor_at(5), S);
  EXPECT_THROW(PeriodicGridField({4}, {1.0}), Error);
  EXPECT_THROW(PeriodicGridField({4, 4}, {1.0}), Error);
}

TEST(Grid, NonFiniteDetected) {
  PeriodicGridField g({4, 4}, {1.0, 1.0});
  EXPECT_NO_THROW(g.check_finite());
  g.component(1, 1)(3) = std::nan("");
  EXPECT_THROW(g.check_finite(), Error);
}

TEST(Spectral, DerivativesOfTrigonometricModes) {
  const std::vector<int> shape{32, 16};
  const std::vector<double> len{2.0, 3.0};
  PeriodicGridField g(shape, len);
  Eigen::VectorXd f(g.point_count()), fx(g.point_count()), fxy(g.point_count()), lap(g.point_count());
  const double kx = 2 * pi * 3 / len[0], ky = 2 * pi * 2 / len[1];
  for (Eigen::Index p = 0; p < g.point_count(); ++p) {
    const Eigen::VectorXd x = g.coordinates(p);
    f(p) = std::sin(kx * x(0)) * std::cos(ky * x(1));
    fx(p) = kx * std::cos(kx * x(0)) * std::cos(ky * x(1));
    fxy(p) = -kx * ky * std::cos(kx * x(0)) * std::sin(ky * x(1));
    lap(p) = -(kx * kx + ky * ky) * f(p);
  }
  EXPECT_LE((spectral_derivative(f, shape, len, 0) - fx).cwiseAbs().maxCoeff(), 1e-11);
  EXPECT_LE((spectral_second_derivative(f, shape, len, 0, 1) - fxy).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((spectral_laplacian(f, shape, len) - lap).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Poisson, ZeroField) {
  const auto sol = poisson_solve_periodic(constant_field(2, 8, Eigen::Matrix2d::Zero()));
  for (const auto& c : sol.L.components()) EXPECT_TRUE(c.isZero(0.0));
  EXPECT_TRUE(sol.means.isZero(0.0));
}

TEST(Poisson, SingleMode) {
  const double Lx = 2.0;
  PeriodicGridField S({32, 32}, {Lx, 1.0});
  for (Eigen::Index p = 0; p < S.point_count(); ++p) {
    const double s = std::sin(2 * pi * S.coordinates(p)(0) / Lx);
    S.set_tensor(p, s * Eigen::Matrix2d::Identity());
  }
  const auto sol = poisson_solve_periodic(S);
  const double scale = -(Lx / (2 * pi)) * (Lx / (2 * pi));
  for (Eigen::Index p = 0; p < S.point_count(); ++p) {
    const double s = std::sin(2 * pi * S.coordinates(p)(0) / Lx);
    EXPECT_NEAR(sol.L.tensor_at(p)(0, 0), scale * s, 1e-10);
    EXPECT_NEAR(sol.L.tensor_at(p)(1, 1), scale * s, 1e-10);
    EXPECT_NEAR(sol.L.tensor_at(p)(0, 1), 0.0, 1e-12);
  }
}

TEST(Poisson, ConstantFieldIsAllMean) {
  Eigen::Matrix3d C;
  C << 1, 0.5, -2, 0.5, 3, 0.25, -2, 0.25, 4;
  const auto sol = poisson_solve_periodic(constant_field(3, 4, C));
  for (const auto& c : sol.L.components()) EXPECT_LE(c.cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((sol.means - C).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(KTensor, HandValue) {
  const Eigen::Matrix2d L = (Eigen::Matrix2d() << 1, 0, 0, 0).finished();
  const auto K = build_K_from_L(L);
  EXPECT_EQ(K(0, 1, 0, 1), 1.0);
  EXPECT_TRUE(check_riemann_symmetries(K, 2));
}

TEST(KTensor, RandomSymmetricInputsHaveRiemannSymmetries) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  for (int N = 2; N <= 4; ++N)
    for (int k = 0; k < 5; ++k) {
      Eigen::MatrixXd A(N, N);
      for (Eigen::Index i = 0; i < A.size(); ++i) A(i) = n(rng);
      const Eigen::MatrixXd L = A + A.transpose();
      EXPECT_TRUE(check_riemann_symmetries(build_K_from_L(L), N));
    }
  Eigen::Matrix2d bad;
  bad << 0, 1, 0, 0;
  try {
    build_K_from_L(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotRiemannLike);
  }
}

TEST(Representation, RoundTrip2D) {
  const auto S = synthesize_assembled_grid({64, 64}, {1.0, 2.0}, 3, 5);
  const auto r = verify_representation(S);
  EXPECT_LE(r.relative_error, 1e-8);
  EXPECT_LE(r.divergence, 1e-10);
  EXPECT_TRUE(r.k_symmetries);
}

TEST(Representation, RoundTrip3D) {
  const auto S = synthesize_assembled_grid({16, 16, 16}, {1.0, 1.0, 2.0}, 2, 6, false);
  const auto r = verify_representation(S);
  EXPECT_LE(r.relative_error, 1e-8);
  EXPECT_TRUE(r.k_symmetries);
}

TEST(Representation, IdentityIsAllMean) {
  const auto r = verify_representation(constant_field(2, 16, Eigen::Matrix2d::Identity()));
  EXPECT_EQ(r.relative_error, 0.0);
  EXPECT_EQ(r.means, Eigen::MatrixXd::Identity(2, 2));
}

TEST(Representation, DivergentInputIsRejected) {
  auto S = synthesize_assembled_grid({32, 32}, {1.0, 1.0}, 2, 7);
  for (Eigen::Index p = 0; p < S.point_count(); ++p)
    S.component(0, 1)(p) += 1e-3 * std::sin(2 * pi * S.coordinates(p)(1));
  try {
    verify_representation(S);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RejectedInput);
  }
}

TEST(Representation, SynthesisIsDeterministic) {
  const auto a = synthesize_assembled_grid({8, 8}, {1.0, 1.0}, 2, 9);
  const auto b = synthesize_assembled_grid({8, 8}, {1.0, 1.0}, 2, 9);
  const auto c = synthesize_assembled_grid({8, 8}, {1.0, 1.0}, 2, 10);
  EXPECT_EQ(a.components(), b.components());
  EXPECT_NE(a.components(), c.components());
}
