#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rtnn/lbfgs.hpp"

using namespace rtnn;

namespace {

Objective quadratic(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  return [A, b](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = A * x - b;
    return 0.5 * x.dot(A * x) - b.dot(x);
  };
}

double rosenbrock(const Eigen::VectorXd& x, Eigen::VectorXd& g) {
  const double a = 1.0 - x(0), b = x(1) - x(0) * x(0);
  g.resize(2);
  g(0) = -2.0 * a - 400.0 * x(0) * b;
  g(1) = 200.0 * b;
  return a * a + 100.0 * b * b;
}

Eigen::MatrixXd random_spd(int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Eigen::MatrixXd M(d, d);
  for (Eigen::Index i = 0; i < M.size(); ++i) M(i) = n(rng);
  return M * M.transpose() + Eigen::MatrixXd::Identity(d, d);
}

}  // namespace

TEST(Lbfgs, IsotropicQuadraticConvergesQuickly) {
  const Eigen::Vector3d a(0.5, -2.0, 3.0);
  for (const Eigen::Vector3d& x0 : {Eigen::Vector3d(4, -3, 1), Eigen::Vector3d(-100, 20, 0), Eigen::Vector3d(a)}) {
    const LbfgsResult r = minimize(quadratic(Eigen::Matrix3d::Identity(), a), x0);
    EXPECT_EQ(r.reason, Termination::GradientTolerance);
    EXPECT_LE(r.gradient.lpNorm<Eigen::Infinity>(), 1e-10);
    EXPECT_LE(r.iterations, 5);
    EXPECT_LE((r.x - a).norm(), 1e-10);
  }
}

TEST(Lbfgs, QuadraticWithTightLineSearchConvergesWithinDimension) {
  for (int d = 2; d <= 10; ++d) {
    const Eigen::MatrixXd A = random_spd(d, static_cast<std::uint64_t>(d));
    const Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(d, -1, 1);
    const Objective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
      g = A * (x - a);
      return 0.5 * (x - a).dot(g);
    };
    LbfgsOptions o;
    o.memory = 2 * d;
    o.max_iters = d;
    o.c1 = 1e-12;
    o.c2 = 1e-10;
    o.gtol = 0.0;
    o.ftol = 0.0;
    const LbfgsResult r = minimize(f, Eigen::VectorXd::Zero(d), o);
    EXPECT_LE(r.loss, 1e-12) << d;
  }
}

TEST(Lbfgs, Rosenbrock) {
  LbfgsOptions o;
  o.max_iters = 200;
  o.gtol = 1e-9;
  o.ftol = 0.0;
  const LbfgsResult r = minimize(rosenbrock, Eigen::Vector2d(-1.2, 1.0), o);
  EXPECT_LE(r.iterations, 200);
  EXPECT_LE((r.x - Eigen::Vector2d(1, 1)).norm(), 1e-6);
  EXPECT_LE(r.loss, 1e-12);
}

TEST(Lbfgs, StationaryStartTakesNoStep) {
  const Eigen::Matrix2d A = Eigen::Matrix2d::Identity();
  const LbfgsResult r = minimize(quadratic(A, Eigen::Vector2d::Zero()), Eigen::Vector2d::Zero());
  EXPECT_EQ(r.iterations, 0);
  EXPECT_EQ(r.reason, Termination::GradientTolerance);
  EXPECT_EQ(r.x, Eigen::Vector2d::Zero());
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_EQ(r.history[0].iter, 0);
}

TEST(Lbfgs, LossIsMonotoneAndHistoryConsistent) {
  LbfgsOptions o;
  o.max_iters = 60;
  std::vector<IterationRecord> seen;
  const LbfgsResult r = minimize(rosenbrock, Eigen::Vector2d(-1.2, 1.0), o, [&](const IterationRecord& h) {
    seen.push_back(h);
  });
  ASSERT_EQ(seen.size(), r.history.size());
  ASSERT_EQ(static_cast<int>(r.history.size()), r.iterations + 1);
  for (std::size_t k = 1; k < r.history.size(); ++k) {
    EXPECT_LE(r.history[k].loss, r.history[k - 1].loss);
    EXPECT_EQ(r.history[k].iter, static_cast<int>(k));
    EXPECT_GT(r.history[k].step, 0.0);
    EXPECT_GE(r.history[k].wall_seconds, r.history[k - 1].wall_seconds);
  }
  EXPECT_EQ(r.history.back().loss, r.loss);
}

TEST(Lbfgs, TrajectoryIsDeterministic) {
  LbfgsOptions o;
  o.max_iters = 40;
  const LbfgsResult a = minimize(rosenbrock, Eigen::Vector2d(-1.2, 1.0), o);
  const LbfgsResult b = minimize(rosenbrock, Eigen::Vector2d(-1.2, 1.0), o);
  EXPECT_EQ(a.x, b.x);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t k = 0; k < a.history.size(); ++k) {
    EXPECT_EQ(a.history[k].loss, b.history[k].loss);
    EXPECT_EQ(a.history[k].grad_norm, b.history[k].grad_norm);
    EXPECT_EQ(a.history[k].step, b.history[k].step);
  }
}

TEST(Lbfgs, IterationBudget) {
  LbfgsOptions o;
  o.max_iters = 3;
  const LbfgsResult r = minimize(rosenbrock, Eigen::Vector2d(-1.2, 1.0), o);
  EXPECT_EQ(r.iterations, 3);
  EXPECT_EQ(r.reason, Termination::MaxIterations);
}

TEST(Lbfgs, RelativeLossTolerance) {
  // Slow quartic descent towards a nonzero minimum.
  const Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = 4.0 * x.array().cube().matrix();
    return 1.0 + x.array().pow(4).sum();
  };
  LbfgsOptions o;
  o.gtol = 0.0;
  o.ftol = 1e-6;
  o.max_iters = 1000;
  const LbfgsResult r = minimize(f, Eigen::Vector2d(2.0, -1.0), o);
  EXPECT_EQ(r.reason, Termination::LossTolerance);
  EXPECT_LT(r.iterations, 1000);
  const double f1 = r.history[r.history.size() - 2].loss, f2 = r.loss;
  EXPECT_LE(std::abs(f1 - f2), 1e-6 * std::max(f1, f2));
}

TEST(Lbfgs, InfiniteRegionsAreAvoided) {
  // f = x^2 - log(1 - x), +inf for x >= 1, minimum at (1 - sqrt(3)) / 2.
  const Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g.resize(1);
    if (x(0) >= 1.0) {
      g(0) = 0.0;
      return std::numeric_limits<double>::infinity();
    }
    g(0) = 2.0 * x(0) + 1.0 / (1.0 - x(0));
    return x(0) * x(0) - std::log(1.0 - x(0));
  };
  LbfgsOptions o;
  o.gtol = 1e-10;
  const LbfgsResult r = minimize(f, Eigen::VectorXd::Constant(1, 0.9), o);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_NEAR(r.x(0), (1.0 - std::sqrt(3.0)) / 2.0, 1e-8);
}

TEST(Lbfgs, NonFiniteStartIsAnError) {
  const Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = x;
    return std::nan("");
  };
  EXPECT_THROW(minimize(f, Eigen::Vector2d(1, 1)), Error);
}

TEST(Lbfgs, OptionsAreValidated) {
  LbfgsOptions o;
  o.memory = 0;
  EXPECT_THROW(minimize(rosenbrock, Eigen::Vector2d(0, 0), o), Error);
  o = {};
  o.c1 = 0.95;
  EXPECT_THROW(minimize(rosenbrock, Eigen::Vector2d(0, 0), o), Error);
}

TEST(Lbfgs, UsesLossProgramGradient) {
  TapedLossProgram prog(2, [](std::span<const ad::Var> p) {
    const ad::Var a = 1.0 - p[0], b = p[1] - p[0] * p[0];
    return a * a + 100.0 * b * b;
  });
  LbfgsOptions o;
  o.max_iters = 200;
  o.ftol = 0.0;
  o.gtol = 1e-9;
  const LbfgsResult r = minimize(prog, Eigen::Vector2d(-1.2, 1.0), o);
  EXPECT_LE((r.x - Eigen::Vector2d(1, 1)).norm(), 1e-6);
}
