#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fd_oracle.hpp"
#include "rtnn/autodiff.hpp"
#include "rtnn/jet.hpp"

using namespace rtnn;
using rtnn::test::rel_err;

TEST(Jet, VariableSeeds) {
  const Jet3 x = jet_variable(0, 2.5, 2);
  EXPECT_EQ(x.value(), 2.5);
  EXPECT_EQ(x.d(0), 1.0);
  EXPECT_EQ(x.d(1), 0.0);
  for (int p = 0; p < jet_hess_size(2); ++p) EXPECT_EQ(x.hess(p), 0.0);
  for (int t = 0; t < jet_third_size(2); ++t) EXPECT_EQ(x.third(t), 0.0);

  const Jet3 y = jet_variable(1, 0.0, 3);
  EXPECT_EQ(y.d(0), 0.0);
  EXPECT_EQ(y.d(1), 1.0);
  EXPECT_EQ(y.d(2), 0.0);

  const Jet3 c = jet_constant(7.0);
  EXPECT_EQ(c.value(), 7.0);
  EXPECT_EQ(c.nvars(), 0);
}

TEST(Jet, VariableRejectsBadIndex) {
  try {
    jet_variable(2, 1.0, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IndexOutOfRange);
  }
  EXPECT_THROW(jet_variable(-1, 1.0, 2), Error);
  EXPECT_THROW(jet_variable(0, 1.0, 5), Error);
}

TEST(Jet, ProductOfVariables) {
  const Jet3 x = jet_variable(0, 1.0, 1);
  const Jet3 f = x * x;
  EXPECT_EQ(f.value(), 1.0);
  EXPECT_EQ(f.d(0), 2.0);
  EXPECT_EQ(f.d2(0, 0), 2.0);
  EXPECT_EQ(f.d3(0, 0, 0), 0.0);

  const Jet3 x5 = (x * x) * (x * x * x);
  EXPECT_EQ(x5.d3(0, 0, 0), 60.0);
}

TEST(Jet, Reciprocal) {
  const Jet3 x = jet_variable(0, 0.0, 1);
  const Jet3 h = 1.0 / (1.0 + x * x);
  EXPECT_EQ(h.value(), 1.0);
  EXPECT_EQ(h.d(0), 0.0);
  EXPECT_EQ(h.d2(0, 0), -2.0);
  EXPECT_EQ(h.d3(0, 0, 0), 0.0);
}

TEST(Jet, DivisionByZeroValue) {
  const Jet3 x = jet_variable(0, 0.0, 1);
  try {
    (void)(jet_constant(1.0) / x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DivisionSingularity);
  }
}

TEST(Jet, MixedNvarsRejected) {
  EXPECT_THROW((void)(jet_variable(0, 1.0, 2) + jet_variable(0, 1.0, 3)), Error);
  EXPECT_NO_THROW((void)(jet_variable(0, 1.0, 2) + jet_constant(3.0)));
}

TEST(Jet, TanhAtZeroAndOne) {
  const Jet3 t0 = tanh(jet_variable(0, 0.0, 1));
  EXPECT_EQ(t0.value(), 0.0);
  EXPECT_EQ(t0.d(0), 1.0);
  EXPECT_EQ(t0.d2(0, 0), 0.0);
  EXPECT_EQ(t0.d3(0, 0, 0), -2.0);

  const Jet3 t1 = tanh(jet_variable(0, 1.0, 1));
  EXPECT_NEAR(t1.value(), 0.761594155955765, 1e-15);
  EXPECT_DOUBLE_EQ(t1.d(0), 1.0 - std::tanh(1.0) * std::tanh(1.0));
}

TEST(Jet, TanhMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const auto f = [](const Eigen::VectorXd& v) { return std::tanh(v(0)); };
  for (int k = 0; k < 20; ++k) {
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, u(rng));
    const Jet3 t = tanh(jet_variable(0, x(0), 1));
    EXPECT_LE(rel_err(t.d(0), test::fd1(f, x, 0, 1e-5)), 1e-6);
    EXPECT_LE(rel_err(t.d2(0, 0), test::fd2(f, x, 0, 0, 1e-4)), 1e-5);
    EXPECT_LE(rel_err(t.d3(0, 0, 0), test::fd3(f, x, 0, 0, 0, 1e-3)), 1e-4);
  }
}

TEST(Jet, SymmetricAccessIsPermutationInvariant) {
  const Jet3 x = jet_variable(0, 0.3, 3), y = jet_variable(1, -0.7, 3), z = jet_variable(2, 1.1, 3);
  const Jet3 f = sin(x * y) * exp(z) + x * y * z;
  EXPECT_EQ(f.d2(0, 2), f.d2(2, 0));
  EXPECT_EQ(f.d3(0, 1, 2), f.d3(2, 0, 1));
  EXPECT_EQ(f.d3(1, 1, 0), f.d3(0, 1, 1));
  EXPECT_NEAR(f.d3(0, 1, 2), 1.0 + (std::cos(0.3 * -0.7) - 0.3 * -0.7 * std::sin(0.3 * -0.7)) * std::exp(1.1), 1e-14);
}

TEST(Jet, MultivariateOperationsMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  const auto plain = [](const Eigen::VectorXd& v) {
    const double a = v(0), b = v(1), c = v(2);
    return std::tanh(a * b - c) / (2.0 + std::sin(c)) + std::sqrt(1.0 + a * a) * std::pow(1.5 + b * b, 0.7) -
           std::cos(a - b * c) * std::exp(0.3 * c);
  };
  const auto jetfn = [](const std::vector<Jet3>& v) {
    const Jet3 &a = v[0], &b = v[1], &c = v[2];
    return tanh(a * b - c) / (2.0 + sin(c)) + sqrt(1.0 + a * a) * pow(1.5 + b * b, 0.7) - cos(a - b * c) * exp(0.3 * c);
  };
  double worst1 = 0, worst2 = 0, worst3 = 0;
  for (int k = 0; k < 100; ++k) {
    const Eigen::VectorXd x = test::uniform_vector(rng, 3, -1.0, 1.0);
    std::vector<Jet3> v;
    for (int i = 0; i < 3; ++i) v.push_back(jet_variable(i, x(i), 3));
    const Jet3 f = jetfn(v);
    EXPECT_NEAR(f.value(), plain(x), 1e-14);
    for (int i = 0; i < 3; ++i) {
      worst1 = std::max(worst1, rel_err(f.d(i), test::fd1(plain, x, i, 1e-5)));
      for (int j = i; j < 3; ++j) {
        worst2 = std::max(worst2, rel_err(f.d2(i, j), test::fd2(plain, x, i, j, 1e-4)));
        for (int l = j; l < 3; ++l) worst3 = std::max(worst3, rel_err(f.d3(i, j, l), test::fd3(plain, x, i, j, l, 1e-3)));
      }
    }
  }
  EXPECT_LE(worst1, 1e-6);
  EXPECT_LE(worst2, 1e-5);
  EXPECT_LE(worst3, 1e-4);
}

TEST(Jet, CompositionOfPolynomialsIsExact) {
  // f(g(x)) with g = 2x^2 - x + 3, f = y^3 - y at x = 0.5 vs the expanded polynomial.
  const Jet3 x = jet_variable(0, 0.5, 1);
  const Jet3 g = 2.0 * x * x - x + 3.0;
  const Jet3 fg = g * g * g - g;
  const double xv = 0.5;
  const double gv = 2 * xv * xv - xv + 3, g1 = 4 * xv - 1, g2 = 4;
  EXPECT_DOUBLE_EQ(fg.value(), gv * gv * gv - gv);
  EXPECT_DOUBLE_EQ(fg.d(0), (3 * gv * gv - 1) * g1);
  EXPECT_DOUBLE_EQ(fg.d2(0, 0), 6 * gv * g1 * g1 + (3 * gv * gv - 1) * g2);
  EXPECT_DOUBLE_EQ(fg.d3(0, 0, 0), 6 * g1 * g1 * g1 + 18 * gv * g1 * g2);
}

TEST(Jet, CastTruncates) {
  const Jet3 x = jet_variable(1, 0.4, 2);
  const Jet3 f = x * x * x;
  const Jet<double, 1> f1 = jet_cast<1>(f);
  EXPECT_EQ(f1.value(), f.value());
  EXPECT_EQ(f1.d(1), f.d(1));
}

namespace {
ad::Var square_sum(std::span<const ad::Var> p) {
  ad::Var s(0.0);
  for (const auto& v : p) s += v * v;
  return s;
}
}  // namespace

TEST(ParameterGradient, SumOfSquares) {
  TapedLossProgram prog(2, square_sum);
  const Eigen::VectorXd g = parameter_gradient(prog, Eigen::Vector2d(1.0, -2.0));
  EXPECT_EQ(g, Eigen::Vector2d(2.0, -4.0));
}

TEST(ParameterGradient, ConstantLossHasZeroGradient) {
  TapedLossProgram prog(3, [](std::span<const ad::Var>) { return ad::Var(4.0); });
  EXPECT_TRUE(parameter_gradient(prog, Eigen::Vector3d(1, 2, 3)).isZero(0.0));
}

TEST(ParameterGradient, LinearInTheLoss) {
  const auto L1 = [](std::span<const ad::Var> p) { return tanh(p[0] * p[1]) + exp(p[2]); };
  const auto L2 = [](std::span<const ad::Var> p) { return sin(p[0]) * p[2] / (1.0 + p[1] * p[1]); };
  const double alpha = -1.7;
  TapedLossProgram a(3, L1), b(3, L2);
  TapedLossProgram combo(3, [&](std::span<const ad::Var> p) { return alpha * L1(p) + L2(p); });
  const Eigen::Vector3d x(0.3, -0.4, 0.8);
  const Eigen::VectorXd lhs = parameter_gradient(combo, x);
  const Eigen::VectorXd rhs = alpha * parameter_gradient(a, x) + parameter_gradient(b, x);
  EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ParameterGradient, ThroughJetsMatchesFiniteDifferences) {
  // Loss built from jets whose scalars are tape variables.
  const auto loss = [](std::span<const ad::Var> p) {
    using J = Jet<ad::Var, 3>;
    J x = J::variable(0, ad::Var(0.4), 2);
    J y = J::variable(1, ad::Var(-0.2), 2);
    const J f = tanh(p[0] * x + p[1] * y * y) * (p[2] + x * y);
    return f.d3(0, 0, 1) * f.d3(0, 0, 1) + f.d2(1, 1);
  };
  TapedLossProgram prog(3, loss);
  const Eigen::Vector3d x(0.7, -1.1, 0.5);
  const Eigen::VectorXd g = parameter_gradient(prog, x);
  const Eigen::VectorXd fd = test::fd_gradient([&](const Eigen::VectorXd& p) { return prog.value(p); }, x, 1e-5);
  for (int i = 0; i < 3; ++i) EXPECT_LE(rel_err(g(i), fd(i)), 1e-6) << i;
}

TEST(ParameterGradient, NonFiniteIsReported) {
  TapedLossProgram prog(1, [](std::span<const ad::Var> p) { return sqrt(p[0]); });
  EXPECT_THROW(parameter_gradient(prog, Eigen::VectorXd::Constant(1, -1.0)), Error);
}

TEST(Tape, RepeatedEvaluationIsBitIdentical) {
  const auto L = [](std::span<const ad::Var> p) {
    ad::Var s(0.0);
    for (std::size_t i = 0; i + 1 < p.size(); ++i) s += tanh(p[i] * p[i + 1]) / (1.0 + p[i] * p[i]);
    return s;
  };
  TapedLossProgram prog(50, L);
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(50, -2.0, 2.0);
  Eigen::VectorXd g1, g2;
  const double v1 = prog.value_and_gradient(x, g1);
  const double v2 = prog.value_and_gradient(x, g2);
  EXPECT_EQ(v1, v2);
  EXPECT_EQ(g1, g2);
}
