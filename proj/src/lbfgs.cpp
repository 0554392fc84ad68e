#include "rtnn/lbfgs.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace rtnn {

std::string to_string(Termination t) {
  switch (t) {
    case Termination::GradientTolerance: return "gradient_tolerance";
    case Termination::LossTolerance: return "loss_tolerance";
    case Termination::MaxIterations: return "max_iterations";
    case Termination::LineSearchFailure: return "line_search_failure";
    case Termination::TimeBudget: return "time_budget";
  }
  return "unknown";
}

namespace {

struct Trial {
  double alpha = 0.0;
  double f = 0.0;
  double dphi = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd g;
};

class LineSearch {
 public:
  LineSearch(const Objective& f, const Eigen::VectorXd& x, double f0, const Eigen::VectorXd& d, double dphi0,
             const LbfgsOptions& opts, int& evals)
      : f_(f), x_(x), f0_(f0), d_(d), dphi0_(dphi0), opts_(opts), evals_(evals) {}

  /// Strong-Wolfe step; false when none was found within the budget.
  bool wolfe(double alpha0, Trial& out) {
    Trial prev;
    prev.alpha = 0.0;
    prev.f = f0_;
    prev.dphi = dphi0_;
    double alpha = alpha0;
    for (int i = 0; i < opts_.max_linesearch; ++i) {
      Trial t = eval(alpha);
      if (!std::isfinite(t.f) || t.f > f0_ + opts_.c1 * alpha * dphi0_ || (i > 0 && t.f >= prev.f))
        return zoom(prev, t, out);
      if (std::abs(t.dphi) <= -opts_.c2 * dphi0_) {
        out = std::move(t);
        return true;
      }
      if (t.dphi >= 0.0) return zoom(t, prev, out);
      prev = std::move(t);
      alpha *= 2.0;
    }
    return false;
  }

  /// Armijo backtracking from alpha0.
  bool backtrack(double alpha0, Trial& out) {
    double alpha = alpha0;
    for (int i = 0; i < opts_.max_backtracks; ++i) {
      Trial t = eval(alpha);
      if (std::isfinite(t.f) && t.f <= f0_ + opts_.c1 * alpha * dphi0_ && t.f < f0_) {
        out = std::move(t);
        return true;
      }
      alpha *= 0.5;
    }
    return false;
  }

 private:
  Trial eval(double alpha) {
    Trial t;
    t.alpha = alpha;
    t.x = x_ + alpha * d_;
    t.g.resize(x_.size());
    ++evals_;
    t.f = f_(t.x, t.g);
    if (!std::isfinite(t.f) || !t.g.allFinite()) {
      t.f = std::numeric_limits<double>::infinity();
      t.dphi = std::numeric_limits<double>::quiet_NaN();
    } else {
      t.dphi = t.g.dot(d_);
    }
    return t;
  }

  // lo satisfies sufficient decrease and has the lowest value seen so far.
  bool zoom(Trial lo, Trial hi, Trial& out) {
    for (int i = 0; i < opts_.max_linesearch; ++i) {
      const double a = lo.alpha, b = hi.alpha;
      const double lower = std::min(a, b), upper = std::max(a, b);
      double alpha = 0.5 * (a + b);
      if (std::isfinite(hi.f) && std::isfinite(hi.dphi)) {
        // Minimizer of the cubic through (a, f_a, d_a) and (b, f_b, d_b).
        const double d1 = lo.dphi + hi.dphi - 3.0 * (lo.f - hi.f) / (a - b);
        const double disc = d1 * d1 - lo.dphi * hi.dphi;
        if (disc >= 0.0) {
          const double d2 = std::copysign(std::sqrt(disc), b - a);
          const double c = b - (b - a) * (hi.dphi + d2 - d1) / (hi.dphi - lo.dphi + 2.0 * d2);
          const double margin = 0.1 * (upper - lower);
          if (std::isfinite(c) && c > lower + margin && c < upper - margin) alpha = c;
        }
      }
      if (upper - lower <= 1e-16 * std::max(1.0, upper)) return false;
      Trial t = eval(alpha);
      if (!std::isfinite(t.f) || t.f > f0_ + opts_.c1 * alpha * dphi0_ || t.f >= lo.f) {
        hi = std::move(t);
      } else {
        if (std::abs(t.dphi) <= -opts_.c2 * dphi0_) {
          out = std::move(t);
          return true;
        }
        if (t.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = std::move(t);
      }
    }
    return false;
  }

  const Objective& f_;
  const Eigen::VectorXd& x_;
  double f0_;
  const Eigen::VectorXd& d_;
  double dphi0_;
  const LbfgsOptions& opts_;
  int& evals_;
};

Eigen::VectorXd two_loop(const LbfgsState& st, const Eigen::VectorXd& g) {
  Eigen::VectorXd q = -g;
  const std::size_t m = st.s.size();
  std::vector<double> alpha(m);
  for (std::size_t i = m; i-- > 0;) {
    alpha[i] = st.rho[i] * st.s[i].dot(q);
    q -= alpha[i] * st.y[i];
  }
  if (m > 0) q *= st.s.back().dot(st.y.back()) / st.y.back().squaredNorm();
  for (std::size_t i = 0; i < m; ++i) {
    const double beta = st.rho[i] * st.y[i].dot(q);
    q += (alpha[i] - beta) * st.s[i];
  }
  return q;
}

}  // namespace

LbfgsResult minimize(const Objective& f, const Eigen::VectorXd& x0, const LbfgsOptions& opts,
                     const IterationCallback& on_iteration) {
  if (opts.memory < 1) throw Error(ErrorCode::InvalidArgument, "L-BFGS memory must be >= 1");
  if (!(opts.c1 > 0.0 && opts.c1 < opts.c2 && opts.c2 < 1.0))
    throw Error(ErrorCode::InvalidArgument, "Wolfe constants need 0 < c1 < c2 < 1");
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  LbfgsResult r;
  r.x = x0;
  r.gradient.resize(x0.size());
  r.loss = f(r.x, r.gradient);
  r.state.evaluations = 1;
  if (!std::isfinite(r.loss) || !r.gradient.allFinite())
    throw Error(ErrorCode::NonFinite, "objective is not finite at the starting point");

  auto record = [&](int iter, double step) {
    IterationRecord rec{iter, r.loss, r.gradient.lpNorm<Eigen::Infinity>(), step, elapsed()};
    r.history.push_back(rec);
    if (on_iteration) on_iteration(rec);
  };
  record(0, 0.0);
  r.state.loss = r.loss;
  r.state.grad_norm = r.history.back().grad_norm;
  if (r.state.grad_norm <= opts.gtol) {
    r.reason = Termination::GradientTolerance;
    return r;
  }

  for (int k = 1; k <= opts.max_iters; ++k) {
    Eigen::VectorXd d = two_loop(r.state, r.gradient);
    double dphi0 = r.gradient.dot(d);
    if (!(dphi0 < 0.0) || !d.allFinite()) {
      r.state.s.clear();
      r.state.y.clear();
      r.state.rho.clear();
      d = -r.gradient;
      dphi0 = -r.gradient.squaredNorm();
    }
    const double alpha0 = r.state.s.empty() ? std::min(1.0, 1.0 / r.gradient.lpNorm<Eigen::Infinity>()) : 1.0;

    LineSearch ls(f, r.x, r.loss, d, dphi0, opts, r.state.evaluations);
    Trial t;
    bool ok = ls.wolfe(alpha0, t);
    if (!ok) {
      ok = ls.backtrack(alpha0, t);
      if (ok) ++r.state.damped_steps;
    }
    if (!ok) {
      r.line_search_failed = true;
      r.reason = Termination::LineSearchFailure;
      break;
    }

    Eigen::VectorXd s = t.x - r.x;
    Eigen::VectorXd y = t.g - r.gradient;
    const double sy = s.dot(y);
    const double f_prev = r.loss;
    r.x = std::move(t.x);
    r.gradient = std::move(t.g);
    r.loss = t.f;
    r.iterations = k;
    r.state.iteration = k;
    if (sy > 0.0 && std::isfinite(sy)) {
      r.state.s.push_back(std::move(s));
      r.state.y.push_back(std::move(y));
      r.state.rho.push_back(1.0 / sy);
      if (static_cast<int>(r.state.s.size()) > opts.memory) {
        r.state.s.pop_front();
        r.state.y.pop_front();
        r.state.rho.pop_front();
      }
    } else {
      ++r.state.discarded_pairs;
    }
    record(k, t.alpha);
    r.state.loss = r.loss;
    r.state.grad_norm = r.history.back().grad_norm;

    if (r.state.grad_norm <= opts.gtol) {
      r.reason = Termination::GradientTolerance;
      break;
    }
    const double scale = std::max(std::abs(f_prev), std::abs(r.loss));
    if (std::abs(f_prev - r.loss) <= opts.ftol * scale) {
      r.reason = Termination::LossTolerance;
      break;
    }
    if (opts.max_seconds > 0.0 && elapsed() >= opts.max_seconds) {
      r.reason = Termination::TimeBudget;
      break;
    }
    if (k == opts.max_iters) r.reason = Termination::MaxIterations;
  }
  return r;
}

LbfgsResult minimize(const LossProgram& program, const Eigen::VectorXd& x0, const LbfgsOptions& opts,
                     const IterationCallback& on_iteration) {
  return minimize([&](const Eigen::VectorXd& x, Eigen::VectorXd& g) { return program.value_and_gradient(x, g); }, x0,
                  opts, on_iteration);
}

}  // namespace rtnn
