#include "rtnn/oracle.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>

#include "rtnn/assembly.hpp"

namespace rtnn {

namespace {

using Complex = std::complex<double>;

std::vector<Eigen::Index> strides_of(const std::vector<int>& shape) {
  std::vector<Eigen::Index> s(shape.size(), 1);
  for (std::size_t k = shape.size(); k-- > 1;) s[k - 1] = s[k] * shape[k];
  return s;
}

void fft_nd(std::vector<Complex>& data, const std::vector<int>& shape, bool inverse) {
  Eigen::FFT<double> fft;
  const auto strides = strides_of(shape);
  const auto total = static_cast<Eigen::Index>(data.size());
  std::vector<Complex> line, out;
  for (std::size_t k = 0; k < shape.size(); ++k) {
    const int n = shape[k];
    const Eigen::Index s = strides[k];
    line.resize(static_cast<std::size_t>(n));
    for (Eigen::Index flat = 0; flat < total; ++flat) {
      if ((flat / s) % n != 0) continue;
      for (int i = 0; i < n; ++i) line[static_cast<std::size_t>(i)] = data[static_cast<std::size_t>(flat + i * s)];
      if (inverse)
        fft.inv(out, line);
      else
        fft.fwd(out, line);
      for (int i = 0; i < n; ++i) data[static_cast<std::size_t>(flat + i * s)] = out[static_cast<std::size_t>(i)];
    }
  }
}

/// Signed wavenumber 2 pi m / L of FFT index i; the Nyquist index maps to 0
/// unless keep_nyquist.
double wavenumber(int i, int n, double length, bool keep_nyquist) {
  if (2 * i == n && !keep_nyquist) return 0.0;
  const int m = 2 * i <= n ? i : i - n;
  return 2.0 * std::numbers::pi * m / length;
}

using Multiplier = std::function<Complex(const std::vector<int>&)>;

Eigen::VectorXd apply_multiplier(const Eigen::VectorXd& f, const std::vector<int>& shape, const Multiplier& mult) {
  std::vector<Complex> data(static_cast<std::size_t>(f.size()));
  for (Eigen::Index i = 0; i < f.size(); ++i) data[static_cast<std::size_t>(i)] = f(i);
  fft_nd(data, shape, false);
  const auto strides = strides_of(shape);
  std::vector<int> idx(shape.size());
  for (Eigen::Index flat = 0; flat < f.size(); ++flat) {
    for (std::size_t k = 0; k < shape.size(); ++k) idx[k] = static_cast<int>((flat / strides[k]) % shape[k]);
    data[static_cast<std::size_t>(flat)] *= mult(idx);
  }
  fft_nd(data, shape, true);
  Eigen::VectorXd out(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) out(i) = data[static_cast<std::size_t>(i)].real();
  return out;
}

void check_grid(const std::vector<int>& shape, const std::vector<double>& lengths, Eigen::Index size) {
  if (shape.size() != lengths.size()) throw Error(ErrorCode::ShapeMismatch, "grid shape and lengths disagree");
  Eigen::Index total = 1;
  for (int n : shape) total *= n;
  if (total != size) throw Error(ErrorCode::ShapeMismatch, "field size does not match the grid shape");
}

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

PeriodicGridField::PeriodicGridField(std::vector<int> shape, std::vector<double> lengths)
    : shape_(std::move(shape)), lengths_(std::move(lengths)) {
  if (shape_.size() < 2 || shape_.size() > 4) throw Error(ErrorCode::InvalidDimension, "grid dimension must be 2..4");
  if (shape_.size() != lengths_.size()) throw Error(ErrorCode::ShapeMismatch, "grid shape and lengths disagree");
  points_ = 1;
  for (std::size_t k = 0; k < shape_.size(); ++k) {
    if (shape_[k] < 2) throw Error(ErrorCode::InvalidArgument, "grid axes need at least 2 points");
    if (!(lengths_[k] > 0.0)) throw Error(ErrorCode::InvalidArgument, "grid lengths must be positive");
    points_ *= shape_[k];
  }
  data_.assign(static_cast<std::size_t>(component_count()), Eigen::VectorXd::Zero(points_));
}

int PeriodicGridField::component_index(int a, int b) const {
  if (a > b) std::swap(a, b);
  if (a < 0 || b >= dim()) throw Error(ErrorCode::IndexOutOfRange, "tensor component outside the grid field");
  return a * dim() - a * (a - 1) / 2 + (b - a);
}

Eigen::VectorXd PeriodicGridField::coordinates(Eigen::Index flat) const {
  const auto strides = strides_of(shape_);
  Eigen::VectorXd x(dim());
  for (int k = 0; k < dim(); ++k) {
    const auto ku = static_cast<std::size_t>(k);
    x(k) = static_cast<double>((flat / strides[ku]) % shape_[ku]) * spacing(k);
  }
  return x;
}

Eigen::MatrixXd PeriodicGridField::tensor_at(Eigen::Index flat) const {
  Eigen::MatrixXd S(dim(), dim());
  for (int a = 0; a < dim(); ++a)
    for (int b = 0; b < dim(); ++b) S(a, b) = component(a, b)(flat);
  return S;
}

void PeriodicGridField::set_tensor(Eigen::Index flat, const Eigen::MatrixXd& S) {
  for (int a = 0; a < dim(); ++a)
    for (int b = a; b < dim(); ++b) component(a, b)(flat) = S(a, b);
}

void PeriodicGridField::check_finite() const {
  for (const auto& c : data_)
    if (!c.allFinite()) throw Error(ErrorCode::NonFinite, "grid field has non-finite entries");
}

Eigen::VectorXd spectral_second_derivative(const Eigen::VectorXd& f, const std::vector<int>& shape,
                                           const std::vector<double>& lengths, int c, int d) {
  check_grid(shape, lengths, f.size());
  const auto cu = static_cast<std::size_t>(c), du = static_cast<std::size_t>(d);
  return apply_multiplier(f, shape, [&](const std::vector<int>& i) {
    if (c == d) {
      const double k = wavenumber(i[cu], shape[cu], lengths[cu], true);
      return Complex(-k * k, 0.0);
    }
    const double kc = wavenumber(i[cu], shape[cu], lengths[cu], false);
    const double kd = wavenumber(i[du], shape[du], lengths[du], false);
    return Complex(-kc * kd, 0.0);
  });
}

Eigen::VectorXd spectral_derivative(const Eigen::VectorXd& f, const std::vector<int>& shape,
                                    const std::vector<double>& lengths, int axis) {
  check_grid(shape, lengths, f.size());
  const auto au = static_cast<std::size_t>(axis);
  return apply_multiplier(f, shape, [&](const std::vector<int>& i) {
    return Complex(0.0, wavenumber(i[au], shape[au], lengths[au], false));
  });
}

Eigen::VectorXd spectral_laplacian(const Eigen::VectorXd& f, const std::vector<int>& shape,
                                   const std::vector<double>& lengths) {
  check_grid(shape, lengths, f.size());
  return apply_multiplier(f, shape, [&](const std::vector<int>& i) {
    double k2 = 0.0;
    for (std::size_t a = 0; a < shape.size(); ++a) {
      const double k = wavenumber(i[a], shape[a], lengths[a], true);
      k2 += k * k;
    }
    return Complex(-k2, 0.0);
  });
}

PoissonSolution poisson_solve_periodic(const PeriodicGridField& S) {
  for (int n : S.shape())
    if (n % 2 != 0) throw Error(ErrorCode::InvalidArgument, "periodic Poisson solve needs even grid sizes");
  S.check_finite();
  const int N = S.dim();
  PoissonSolution out;
  out.L = PeriodicGridField(S.shape(), S.lengths());
  out.means = Eigen::MatrixXd::Zero(N, N);
  for (int a = 0; a < N; ++a)
    for (int b = a; b < N; ++b) {
      const Eigen::VectorXd& s = S.component(a, b);
      const double mean = s.mean();
      out.means(a, b) = out.means(b, a) = mean;
      const Eigen::VectorXd centered = s.array() - mean;
      out.L.component(a, b) = apply_multiplier(centered, S.shape(), [&](const std::vector<int>& i) {
        double k2 = 0.0;
        for (std::size_t k = 0; k < i.size(); ++k) {
          const double w = wavenumber(i[k], S.shape()[k], S.lengths()[k], true);
          k2 += w * w;
        }
        return k2 == 0.0 ? Complex(0.0, 0.0) : Complex(-1.0 / k2, 0.0);
      });
    }
  return out;
}

DenseTensor4<double> build_K_from_L(const Eigen::MatrixXd& L, double tol) {
  if (L.rows() != L.cols()) throw Error(ErrorCode::ShapeMismatch, "L must be square");
  const int N = static_cast<int>(L.rows());
  const double scale = std::max(1.0, L.cwiseAbs().maxCoeff());
  if ((L - L.transpose()).cwiseAbs().maxCoeff() > tol * scale)
    throw Error(ErrorCode::NotRiemannLike, "L is not symmetric");
  // Upper triangle only.
  auto l = [&](int i, int j) { return i <= j ? L(i, j) : L(j, i); };
  auto delta = [](int i, int j) { return i == j ? 1.0 : 0.0; };
  DenseTensor4<double> K(N);
  for (int a = 0; a < N; ++a)
    for (int c = 0; c < N; ++c)
      for (int b = 0; b < N; ++b)
        for (int d = 0; d < N; ++d)
          K(a, c, b, d) =
              (delta(a, b) * l(d, c) + delta(c, d) * l(b, a)) - (delta(a, d) * l(b, c) + delta(c, b) * l(d, a));
  return K;
}

RepresentationReport verify_representation(const PeriodicGridField& S, double divergence_gate) {
  for (int n : S.shape())
    if (n % 2 != 0) throw Error(ErrorCode::InvalidArgument, "representation check needs even grid sizes");
  S.check_finite();
  const int N = S.dim();
  const auto& shape = S.shape();
  const auto& lengths = S.lengths();
  const Eigen::Index P = S.point_count();
  RepresentationReport rep;

  double smax = 0.0;
  for (const auto& c : S.components()) smax = std::max(smax, c.cwiseAbs().maxCoeff());
  double div = 0.0;
  for (int b = 0; b < N; ++b) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(P);
    for (int c = 0; c < N; ++c) d += spectral_derivative(S.component(b, c), shape, lengths, c);
    div = std::max(div, d.cwiseAbs().maxCoeff());
  }
  rep.divergence = div / std::max(1.0, smax);
  if (rep.divergence > divergence_gate)
    throw Error(ErrorCode::RejectedInput,
                "input is not divergence-free (relative divergence " + std::to_string(rep.divergence) + ")");

  PoissonSolution sol = poisson_solve_periodic(S);
  rep.means = sol.means;
  for (int a = 0; a < N; ++a)
    for (int b = a; b < N; ++b) {
      const Eigen::VectorXd lap = spectral_laplacian(sol.L.component(a, b), shape, lengths);
      const Eigen::VectorXd rhs = S.component(a, b).array() - sol.means(a, b);
      rep.poisson_residual = std::max(rep.poisson_residual, (lap - rhs).cwiseAbs().maxCoeff());
    }

  // K at every grid point, one field per (a, c, b, d).
  const int n4 = N * N * N * N;
  std::vector<Eigen::VectorXd> K(static_cast<std::size_t>(n4), Eigen::VectorXd(P));
  for (Eigen::Index x = 0; x < P; ++x) {
    const DenseTensor4<double> k = build_K_from_L(sol.L.tensor_at(x));
    if (!check_riemann_symmetries(k, N)) rep.k_symmetries = false;
    for (int i = 0; i < n4; ++i) K[static_cast<std::size_t>(i)](x) = k.flat()(i);
  }
  auto kidx = [&](int a, int c, int b, int d) { return static_cast<std::size_t>(((a * N + c) * N + b) * N + d); };

  double num = 0.0, den = 0.0;
  for (int a = 0; a < N; ++a)
    for (int b = a; b < N; ++b) {
      Eigen::VectorXd phi = Eigen::VectorXd::Constant(P, sol.means(a, b));
      for (int c = 0; c < N; ++c)
        for (int d = 0; d < N; ++d) {
          const Eigen::VectorXd& f = K[kidx(a, c, b, d)];
          if (f.cwiseAbs().maxCoeff() == 0.0) continue;
          phi += spectral_second_derivative(f, shape, lengths, c, d);
        }
      const double w = a == b ? 1.0 : 2.0;
      num += w * (phi - S.component(a, b)).squaredNorm();
      den += w * S.component(a, b).squaredNorm();
    }
  rep.relative_error = den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
  return rep;
}

PeriodicGridField synthesize_assembled_grid(const std::vector<int>& shape, const std::vector<double>& lengths,
                                            int max_mode, std::uint64_t seed, bool identity_offset) {
  if (max_mode < 1) throw Error(ErrorCode::InvalidArgument, "max_mode must be >= 1");
  PeriodicGridField out(shape, lengths);
  const int N = out.dim();
  const AssemblyPlan plan = AssemblyPlan::full(N);
  constexpr int kTerms = 3;
  struct Mode {
    std::vector<double> k;
    double a, b;
  };
  std::mt19937_64 rng(seed);
  std::vector<std::vector<Mode>> coeff(static_cast<std::size_t>(plan.slot_count()));
  for (auto& modes : coeff)
    for (int t = 0; t < kTerms; ++t) {
      Mode m;
      for (int i = 0; i < N; ++i) {
        const int ki = std::min(2 * max_mode, static_cast<int>(unit_uniform(rng) * (2 * max_mode + 1))) - max_mode;
        m.k.push_back(2.0 * std::numbers::pi * ki / lengths[static_cast<std::size_t>(i)]);
      }
      m.a = 2.0 * unit_uniform(rng) - 1.0;
      m.b = 2.0 * unit_uniform(rng) - 1.0;
      modes.push_back(std::move(m));
    }

  using J = Jet<double, 2>;
  std::vector<J> c(coeff.size());
  for (Eigen::Index p = 0; p < out.point_count(); ++p) {
    const auto x = seed_jets<2>(out.coordinates(p));
    for (std::size_t s = 0; s < coeff.size(); ++s) {
      J v;
      for (const Mode& m : coeff[s]) {
        J phase;
        for (int i = 0; i < N; ++i) phase += x[static_cast<std::size_t>(i)] * m.k[static_cast<std::size_t>(i)];
        v += cos(phase) * m.a + sin(phase) * m.b;
      }
      c[s] = v;
    }
    out.set_tensor(p, assemble_from_jets<2>(plan, std::span<const J>(c), identity_offset).S);
  }
  return out;
}

}  // namespace rtnn
