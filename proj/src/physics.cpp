#include "rtnn/physics.hpp"

#include <random>

namespace rtnn {

namespace {

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Eigen::VectorXd uniform_point(const Box& box, std::mt19937_64& rng) {
  Eigen::VectorXd x(box.lo.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = box.lo(k) + (box.hi(k) - box.lo(k)) * unit_uniform(rng);
  return x;
}

Eigen::MatrixXd targets_at(const ProblemSpec& problem, const Eigen::MatrixXd& points) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(problem.field_names().size()), points.cols());
  for (Eigen::Index p = 0; p < points.cols(); ++p) out.col(p) = problem.exact_fields(points.col(p));
  return out;
}

}  // namespace

void EulerVortexConfig::validate() const {
  if (!(gamma > 1.0)) throw Error(ErrorCode::Config, "gamma must exceed 1");
  if (!(rho_inf > 0.0)) throw Error(ErrorCode::Config, "rho_inf must be positive");
  if (!(T_inf > 0.0)) throw Error(ErrorCode::Config, "T_inf must be positive");
  if (!(Lx > 0.0 && Ly > 0.0 && T > 0.0)) throw Error(ErrorCode::Config, "domain extents must be positive");
  const double core = T_inf - (gamma - 1.0) * beta * beta / (8.0 * std::numbers::pi * std::numbers::pi) * std::exp(2.0);
  if (!(core > 0.0)) throw Error(ErrorCode::Config, "vortex strength makes the core temperature non-positive");
}

void BeltramiConfig::validate() const {
  if (!(nu > 0.0)) throw Error(ErrorCode::Config, "nu must be positive");
  if (!(T > 0.0)) throw Error(ErrorCode::Config, "final time must be positive");
}

void MhdConfig::validate() const {
  if (!(nu > 0.0) || !(eta > 0.0)) throw Error(ErrorCode::Config, "nu and eta must be positive");
  if (nu != eta) throw Error(ErrorCode::Config, "the manufactured MHD state needs nu == eta");
  if (!(L > 0.0 && T > 0.0)) throw Error(ErrorCode::Config, "domain extents must be positive");
}

ProblemKind parse_problem_kind(const std::string& id) {
  if (id == "euler_vortex") return ProblemKind::EulerVortex;
  if (id == "beltrami") return ProblemKind::Beltrami;
  if (id == "mhd2d") return ProblemKind::Mhd2d;
  throw Error(ErrorCode::Config, "unknown problem id '" + id + "'");
}

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::EulerVortex: return "euler_vortex";
    case ProblemKind::Beltrami: return "beltrami";
    case ProblemKind::Mhd2d: return "mhd2d";
  }
  return "unknown";
}

bool Box::contains(const Eigen::VectorXd& x, double tol) const {
  if (x.size() != lo.size()) return false;
  for (Eigen::Index k = 0; k < x.size(); ++k)
    if (x(k) < lo(k) - tol || x(k) > hi(k) + tol) return false;
  return true;
}

int ProblemSpec::dim() const { return kind == ProblemKind::Beltrami ? 4 : 3; }

Box ProblemSpec::domain() const {
  Box b;
  switch (kind) {
    case ProblemKind::EulerVortex:
      b.lo = Eigen::Vector3d(0.0, 0.0, 0.0);
      b.hi = Eigen::Vector3d(euler.T, euler.Lx, euler.Ly);
      break;
    case ProblemKind::Beltrami:
      b.lo = Eigen::Vector4d(0.0, -1.0, -1.0, -1.0);
      b.hi = Eigen::Vector4d(beltrami.T, 1.0, 1.0, 1.0);
      break;
    case ProblemKind::Mhd2d:
      b.lo = Eigen::Vector3d(0.0, 0.0, 0.0);
      b.hi = Eigen::Vector3d(mhd.T, mhd.L, mhd.L);
      break;
  }
  return b;
}

std::vector<std::string> ProblemSpec::field_names() const {
  switch (kind) {
    case ProblemKind::EulerVortex: return {"rho", "u", "v", "p"};
    case ProblemKind::Beltrami: return {"u", "v", "w", "p"};
    case ProblemKind::Mhd2d: return {"u", "v", "Bx", "By"};
  }
  return {};
}

Eigen::VectorXd ProblemSpec::exact_fields(const Eigen::VectorXd& x) const {
  if (x.size() != dim()) throw Error(ErrorCode::ShapeMismatch, "point dimension does not match the problem");
  switch (kind) {
    case ProblemKind::EulerVortex: {
      const auto s = euler_vortex_exact(euler, x(0), x(1), x(2));
      return Eigen::Vector4d(s.rho, s.u, s.v, s.p);
    }
    case ProblemKind::Beltrami: {
      const auto s = beltrami_exact(beltrami, x(0), x(1), x(2), x(3));
      return Eigen::Vector4d(s.u, s.v, s.w, s.p);
    }
    case ProblemKind::Mhd2d: {
      const auto s = mhd_exact(mhd, x(0), x(1), x(2));
      return Eigen::Vector4d(s.u, s.v, s.Bx, s.By);
    }
  }
  return {};
}

void ProblemSpec::validate() const {
  switch (kind) {
    case ProblemKind::EulerVortex: euler.validate(); break;
    case ProblemKind::Beltrami: beltrami.validate(); break;
    case ProblemKind::Mhd2d: mhd.validate(); break;
  }
}

CollocationSet sample_collocation(const ProblemSpec& problem, const CollocationCounts& counts, std::uint64_t seed) {
  if (counts.interior < 1) throw Error(ErrorCode::InvalidArgument, "interior count must be >= 1");
  if (counts.initial < 1) throw Error(ErrorCode::InvalidArgument, "initial count must be >= 1");
  if (problem.periodic() ? counts.periodic < 1 : counts.boundary < 1)
    throw Error(ErrorCode::InvalidArgument, "boundary count must be >= 1");
  const Box box = problem.domain();
  const int N = problem.dim();
  const int n = N - 1;
  std::mt19937_64 rng(seed);
  CollocationSet set;
  set.seed = seed;

  set.interior.resize(N, counts.interior);
  for (int p = 0; p < counts.interior; ++p) set.interior.col(p) = uniform_point(box, rng);

  if (problem.periodic()) {
    set.periodic_a.resize(N, counts.periodic);
    set.periodic_b.resize(N, counts.periodic);
    for (int p = 0; p < counts.periodic; ++p) {
      const int axis = 1 + std::min(n - 1, static_cast<int>(unit_uniform(rng) * n));
      Eigen::VectorXd x = uniform_point(box, rng);
      x(axis) = box.lo(axis);
      set.periodic_a.col(p) = x;
      x(axis) = box.hi(axis);
      set.periodic_b.col(p) = x;
    }
    set.boundary.resize(N, 0);
    set.boundary_targets.resize(static_cast<Eigen::Index>(problem.field_names().size()), 0);
  } else {
    set.boundary.resize(N, counts.boundary);
    for (int p = 0; p < counts.boundary; ++p) {
      const int face = std::min(2 * n - 1, static_cast<int>(unit_uniform(rng) * 2 * n));
      Eigen::VectorXd x = uniform_point(box, rng);
      const int axis = 1 + face / 2;
      x(axis) = face % 2 == 0 ? box.lo(axis) : box.hi(axis);
      set.boundary.col(p) = x;
    }
    set.boundary_targets = targets_at(problem, set.boundary);
  }

  set.initial.resize(N, counts.initial);
  for (int p = 0; p < counts.initial; ++p) {
    Eigen::VectorXd x = uniform_point(box, rng);
    x(0) = box.lo(0);
    set.initial.col(p) = x;
  }
  set.initial_targets = targets_at(problem, set.initial);
  return set;
}

ValidationSet make_validation_set(const ProblemSpec& problem, int count, std::uint64_t seed) {
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "validation count must be >= 1");
  const Box box = problem.domain();
  std::mt19937_64 rng(seed);
  ValidationSet v;
  v.names = problem.field_names();
  v.points.resize(problem.dim(), count);
  for (int p = 0; p < count; ++p) v.points.col(p) = uniform_point(box, rng);
  v.fields = targets_at(problem, v.points);
  return v;
}

RelativeL2 relative_l2(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& exact, const std::vector<std::string>& names) {
  if (pred.rows() != exact.rows() || pred.cols() != exact.cols())
    throw Error(ErrorCode::ShapeMismatch, "prediction and exact field arrays differ in shape");
  if (static_cast<Eigen::Index>(names.size()) != exact.rows())
    throw Error(ErrorCode::ShapeMismatch, "field names do not match field rows");
  if (exact.cols() == 0) throw Error(ErrorCode::DegenerateMetric, "empty validation set");
  RelativeL2 r;
  r.names = names;
  r.per_field.resize(exact.rows());
  for (Eigen::Index f = 0; f < exact.rows(); ++f) {
    const double denom = exact.row(f).norm();
    if (denom == 0.0) throw Error(ErrorCode::DegenerateMetric, "exact field '" + names[static_cast<std::size_t>(f)] + "' has zero norm");
    r.per_field(f) = (pred.row(f) - exact.row(f)).norm() / denom;
  }
  r.mean = r.per_field.mean();
  return r;
}

double deviatoric_loss(std::span<const EulerFields<double>> samples) {
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "deviatoric loss over an empty sample set");
  std::vector<double> terms;
  terms.reserve(samples.size());
  for (const auto& s : samples) terms.push_back(frobenius_squared<double>(s.sigma_dev));
  return pairwise_sum(terms) / static_cast<double>(samples.size());
}

double boundary_and_initial_losses(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& predict,
                                   const CollocationSet& colloc) {
  auto mean_mismatch = [&](const Eigen::MatrixXd& pts, const Eigen::MatrixXd& targets) {
    if (pts.cols() == 0) return 0.0;
    if (targets.cols() != pts.cols()) throw Error(ErrorCode::InvalidArgument, "collocation points without targets");
    std::vector<double> terms;
    for (Eigen::Index p = 0; p < pts.cols(); ++p) {
      const Eigen::VectorXd f = predict(pts.col(p));
      if (f.size() != targets.rows()) throw Error(ErrorCode::ShapeMismatch, "predicted field count");
      terms.push_back((f - targets.col(p)).squaredNorm());
    }
    return pairwise_sum(terms) / static_cast<double>(pts.cols());
  };
  return mean_mismatch(colloc.boundary, colloc.boundary_targets) + mean_mismatch(colloc.initial, colloc.initial_targets);
}

double momentum_equivalence_check(const TensorField& S, const Eigen::VectorXd& x, double h, double gamma) {
  const Eigen::Index N = x.size();
  const Eigen::Index n = N - 1;
  // Fields at y packed as [m (n), flux (n*n), sigma_dev (n*n)].
  auto pack = [&](const Eigen::VectorXd& y) {
    const Eigen::MatrixXd s = S(y);
    const EulerFields<double> f = extract_euler<double>(s, gamma);
    Eigen::VectorXd out(n + 2 * n * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      out(i) = f.momentum(i);
      for (Eigen::Index k = 0; k < n; ++k) {
        out(n + i * n + k) = f.momentum(i) * f.velocity(k) + (i == k ? f.pressure : 0.0);
        out(n + n * n + i * n + k) = f.sigma_dev(i, k);
      }
    }
    return out;
  };
  std::vector<Eigen::VectorXd> dq;
  for (Eigen::Index c = 0; c < N; ++c) {
    Eigen::VectorXd xp = x, xm = x;
    xp(c) += h;
    xm(c) -= h;
    dq.push_back((pack(xp) - pack(xm)) / (2.0 * h));
  }
  double worst = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double explicit_residual = dq[0](i);
    double div_dev = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      explicit_residual += dq[static_cast<std::size_t>(k + 1)](n + i * n + k);
      div_dev += dq[static_cast<std::size_t>(k + 1)](n + n * n + i * n + k);
    }
    worst = std::max(worst, std::abs(explicit_residual + div_dev));
  }
  return worst;
}

double momentum_equivalence_check(const CoefficientNetwork& net, const AssemblyPlan& plan, bool identity_offset,
                                  const Eigen::VectorXd& x, double h) {
  return momentum_equivalence_check(
      [&](const Eigen::VectorXd& y) { return assemble_value(net, plan, y, identity_offset); }, x, h);
}

Eigen::MatrixXd euler_flux_tensor(const EulerVortexConfig& c, const Eigen::VectorXd& x) {
  const auto s = euler_vortex_exact(c, x(0), x(1), x(2));
  Eigen::MatrixXd S(3, 3);
  const double mu = s.rho * s.u, mv = s.rho * s.v;
  S << s.rho, mu, mv, mu, mu * s.u + s.p, mu * s.v, mv, mu * s.v, mv * s.v + s.p;
  return S;
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace rtnn
