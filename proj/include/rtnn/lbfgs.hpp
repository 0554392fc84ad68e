#pragma once

#include <Eigen/Dense>

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "rtnn/autodiff.hpp"

namespace rtnn {

struct LbfgsOptions {
  int max_iters = 1000;
  int memory = 10;
  /// Stop when ||grad||_inf <= gtol.
  double gtol = 1e-10;
  /// Stop when |f_k - f_{k+1}| <= ftol * max(|f_k|, |f_{k+1}|).
  double ftol = 1e-12;
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_linesearch = 25;
  int max_backtracks = 40;
  /// Wall-clock budget in seconds; 0 disables it.
  double max_seconds = 0.0;
};

struct IterationRecord {
  int iter = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
  double wall_seconds = 0.0;
};

enum class Termination { GradientTolerance, LossTolerance, MaxIterations, LineSearchFailure, TimeBudget };

std::string to_string(Termination t);

/// Optimizer memory and counters.
struct LbfgsState {
  std::deque<Eigen::VectorXd> s;
  std::deque<Eigen::VectorXd> y;
  std::deque<double> rho;
  int iteration = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  int evaluations = 0;
  int damped_steps = 0;
  int discarded_pairs = 0;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double loss = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  Termination reason = Termination::MaxIterations;
  /// Set when neither the Wolfe search nor the Armijo fallback found a step.
  bool line_search_failed = false;
  LbfgsState state;
  std::vector<IterationRecord> history;
};

/// f(x), writing grad f(x) into the second argument.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;
using IterationCallback = std::function<void(const IterationRecord&)>;

/// Two-loop L-BFGS with a strong-Wolfe line search (bracketing and cubic
/// zoom). When the Wolfe search fails, an Armijo backtracking step is taken
/// instead; if that fails too, the best iterate is returned with
/// line_search_failed set. Non-finite trial values count as too-long steps.
/// History row 0 is the starting point.
LbfgsResult minimize(const Objective& f, const Eigen::VectorXd& x0, const LbfgsOptions& opts = {},
                     const IterationCallback& on_iteration = {});

LbfgsResult minimize(const LossProgram& program, const Eigen::VectorXd& x0, const LbfgsOptions& opts = {},
                     const IterationCallback& on_iteration = {});

}  // namespace rtnn
