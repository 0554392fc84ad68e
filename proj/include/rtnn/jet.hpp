#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <string>
#include <type_traits>

#include <Eigen/Core>

#include "rtnn/error.hpp"

namespace rtnn {

inline constexpr int kMaxJetVars = 4;

constexpr int jet_hess_size(int nvars) { return nvars * (nvars + 1) / 2; }
constexpr int jet_third_size(int nvars) { return nvars * (nvars + 1) * (nvars + 2) / 6; }

/// Number of stored components of a jet truncated at `order`.
constexpr int jet_component_count(int nvars, int order) {
  int n = 1;
  if (order >= 1) n += nvars;
  if (order >= 2) n += jet_hess_size(nvars);
  if (order >= 3) n += jet_third_size(nvars);
  return n;
}

/// Canonical multi-index tables.
///
/// Sorted pairs (i <= j) are ordered by j, then i; sorted triples (i <= j <= k)
/// by k, then j, then i. With this ordering the first jet_hess_size(n) pairs
/// and first jet_third_size(n) triples are exactly those over n variables, so
/// one table serves every nvars.
struct JetLayout {
  std::array<std::array<int, 2>, jet_hess_size(kMaxJetVars)> pairs{};
  std::array<std::array<int, 3>, jet_third_size(kMaxJetVars)> triples{};
  std::array<std::array<int, kMaxJetVars>, kMaxJetVars> pair_index{};
  std::array<std::array<std::array<int, kMaxJetVars>, kMaxJetVars>, kMaxJetVars> triple_index{};

  constexpr JetLayout() {
    int p = 0;
    for (int j = 0; j < kMaxJetVars; ++j)
      for (int i = 0; i <= j; ++i) {
        pairs[p] = {i, j};
        pair_index[i][j] = pair_index[j][i] = p;
        ++p;
      }
    int t = 0;
    for (int k = 0; k < kMaxJetVars; ++k)
      for (int j = 0; j <= k; ++j)
        for (int i = 0; i <= j; ++i) {
          triples[t] = {i, j, k};
          const int idx[3] = {i, j, k};
          const int perm[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
          for (const auto& pm : perm) triple_index[idx[pm[0]]][idx[pm[1]]][idx[pm[2]]] = t;
          ++t;
        }
  }
};

inline constexpr JetLayout kJetLayout{};

/// Truncated multivariate Taylor expansion: value and partial derivatives up
/// to `Order` (<= 3) with respect to `nvars` (<= 4) variables.
///
/// Derivatives are stored as actual partials (no factorial scaling) over
/// canonical multi-indices, so symmetry under index permutation is structural.
/// A jet with nvars == 0 is a constant and mixes with any other jet.
template <typename Scalar, int Order = 3>
class Jet {
  static_assert(Order >= 0 && Order <= 3, "jets are truncated at order 3");

 public:
  using scalar_type = Scalar;
  static constexpr int order = Order;

  Jet() : value_(0) { zero_derivatives(); }
  Jet(const Scalar& v) : value_(v) { zero_derivatives(); }  // NOLINT: implicit constant lift
  template <typename T, std::enable_if_t<std::is_arithmetic_v<T> && !std::is_same_v<T, Scalar>, int> = 0>
  Jet(T v) : value_(Scalar(static_cast<double>(v))) {  // NOLINT
    zero_derivatives();
  }

  static Jet constant(const Scalar& v) { return Jet(v); }

  static Jet variable(int index, const Scalar& v, int nvars) {
    if (nvars < 1 || nvars > kMaxJetVars)
      throw Error(ErrorCode::InvalidDimension, "jet nvars must be in [1, 4], got " + std::to_string(nvars));
    if (index < 0 || index >= nvars)
      throw Error(ErrorCode::IndexOutOfRange, "jet variable index " + std::to_string(index) + " outside [0, " +
                                                  std::to_string(nvars) + ")");
    Jet j(v);
    j.nvars_ = nvars;
    if constexpr (Order >= 1) j.grad_[static_cast<std::size_t>(index)] = Scalar(1);
    return j;
  }

  int nvars() const { return nvars_; }
  void set_nvars(int n) { nvars_ = n; }

  const Scalar& value() const { return value_; }
  Scalar& value() { return value_; }

  // Raw canonical storage.
  Scalar& grad(int i) { return grad_[static_cast<std::size_t>(i)]; }
  const Scalar& grad(int i) const { return grad_[static_cast<std::size_t>(i)]; }
  Scalar& hess(int p) { return hess_[static_cast<std::size_t>(p)]; }
  const Scalar& hess(int p) const { return hess_[static_cast<std::size_t>(p)]; }
  Scalar& third(int t) { return third_[static_cast<std::size_t>(t)]; }
  const Scalar& third(int t) const { return third_[static_cast<std::size_t>(t)]; }

  // Permutation-invariant partial derivatives.
  const Scalar& d(int i) const { return grad_[static_cast<std::size_t>(i)]; }
  const Scalar& d2(int i, int j) const { return hess_[static_cast<std::size_t>(kJetLayout.pair_index[i][j])]; }
  const Scalar& d3(int i, int j, int k) const {
    return third_[static_cast<std::size_t>(kJetLayout.triple_index[i][j][k])];
  }

  Jet& operator+=(const Jet& o) {
    nvars_ = merged_nvars(o);
    value_ += o.value_;
    for_each_derivative([&](Scalar& a, const Scalar& b) { a += b; }, o);
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    nvars_ = merged_nvars(o);
    value_ -= o.value_;
    for_each_derivative([&](Scalar& a, const Scalar& b) { a -= b; }, o);
    return *this;
  }
  Jet& operator*=(const Jet& o) { return *this = *this * o; }
  Jet& operator/=(const Jet& o) { return *this = *this / o; }

  Jet operator-() const {
    Jet r = *this;
    r.value_ = -value_;
    for (int i = 0; i < n1(); ++i) r.grad_[i] = -grad_[i];
    for (int p = 0; p < n2(); ++p) r.hess_[p] = -hess_[p];
    for (int t = 0; t < n3(); ++t) r.third_[t] = -third_[t];
    return r;
  }

  /// Scale every component by a plain scalar.
  Jet scaled(const Scalar& s) const {
    Jet r = *this;
    r.value_ = value_ * s;
    for (int i = 0; i < n1(); ++i) r.grad_[i] = grad_[i] * s;
    for (int p = 0; p < n2(); ++p) r.hess_[p] = hess_[p] * s;
    for (int t = 0; t < n3(); ++t) r.third_[t] = third_[t] * s;
    return r;
  }

  friend Jet operator*(const Jet& f, const Jet& g) {
    Jet r;
    r.nvars_ = f.merged_nvars(g);
    const int n = r.nvars_;
    r.value_ = f.value_ * g.value_;
    if constexpr (Order >= 1)
      for (int i = 0; i < n; ++i) r.grad_[i] = f.grad_[i] * g.value_ + f.value_ * g.grad_[i];
    if constexpr (Order >= 2)
      for (int p = 0; p < jet_hess_size(n); ++p) {
        const int i = kJetLayout.pairs[p][0], j = kJetLayout.pairs[p][1];
        r.hess_[p] = f.hess_[p] * g.value_ + f.grad_[i] * g.grad_[j] + f.grad_[j] * g.grad_[i] + f.value_ * g.hess_[p];
      }
    if constexpr (Order >= 3)
      for (int t = 0; t < jet_third_size(n); ++t) {
        const auto [i, j, k] = kJetLayout.triples[t];
        const int ij = kJetLayout.pair_index[i][j], ik = kJetLayout.pair_index[i][k], jk = kJetLayout.pair_index[j][k];
        r.third_[t] = f.third_[t] * g.value_ + f.hess_[ij] * g.grad_[k] + f.hess_[ik] * g.grad_[j] +
                      f.hess_[jk] * g.grad_[i] + f.grad_[i] * g.hess_[jk] + f.grad_[j] * g.hess_[ik] +
                      f.grad_[k] * g.hess_[ij] + f.value_ * g.third_[t];
      }
    return r;
  }

  friend Jet operator/(const Jet& f, const Jet& g) { return f * reciprocal(g); }
  friend Jet operator+(Jet f, const Jet& g) { return f += g; }
  friend Jet operator-(Jet f, const Jet& g) { return f -= g; }

  /// Univariate composition y = phi(z) given phi and its first three
  /// derivatives at z.value() (multivariate Faa di Bruno through order 3).
  Jet compose(const Scalar& y0, const Scalar& y1, const Scalar& y2, const Scalar& y3) const {
    Jet r;
    r.nvars_ = nvars_;
    r.value_ = y0;
    if constexpr (Order >= 1)
      for (int i = 0; i < n1(); ++i) r.grad_[i] = y1 * grad_[i];
    if constexpr (Order >= 2)
      for (int p = 0; p < n2(); ++p) {
        const int i = kJetLayout.pairs[p][0], j = kJetLayout.pairs[p][1];
        r.hess_[p] = y1 * hess_[p] + y2 * grad_[i] * grad_[j];
      }
    if constexpr (Order >= 3)
      for (int t = 0; t < n3(); ++t) {
        const auto [i, j, k] = kJetLayout.triples[t];
        const int ij = kJetLayout.pair_index[i][j], ik = kJetLayout.pair_index[i][k], jk = kJetLayout.pair_index[j][k];
        r.third_[t] = y1 * third_[t] + y2 * (grad_[i] * hess_[jk] + grad_[j] * hess_[ik] + grad_[k] * hess_[ij]) +
                      y3 * grad_[i] * grad_[j] * grad_[k];
      }
    return r;
  }

  friend Jet reciprocal(const Jet& g) {
    if (scalar_value(g.value_) == 0.0) throw Error(ErrorCode::DivisionSingularity, "division by a jet with zero value");
    const Scalar inv = Scalar(1) / g.value_;
    const Scalar inv2 = inv * inv;
    return g.compose(inv, -inv2, Scalar(2) * inv2 * inv, Scalar(-6) * inv2 * inv2);
  }

  friend bool operator==(const Jet& a, const Jet& b) {
    if (a.nvars_ != b.nvars_ || !(a.value_ == b.value_)) return false;
    for (int i = 0; i < a.n1(); ++i)
      if (!(a.grad_[i] == b.grad_[i])) return false;
    for (int p = 0; p < a.n2(); ++p)
      if (!(a.hess_[p] == b.hess_[p])) return false;
    for (int t = 0; t < a.n3(); ++t)
      if (!(a.third_[t] == b.third_[t])) return false;
    return true;
  }

 private:
  static constexpr std::size_t kGrad = Order >= 1 ? kMaxJetVars : 0;
  static constexpr std::size_t kHess = Order >= 2 ? jet_hess_size(kMaxJetVars) : 0;
  static constexpr std::size_t kThird = Order >= 3 ? jet_third_size(kMaxJetVars) : 0;

  static double scalar_value(const Scalar& s) {
    if constexpr (std::is_arithmetic_v<Scalar>) {
      return static_cast<double>(s);
    } else {
      return value_of(s);
    }
  }

  int n1() const { return Order >= 1 ? nvars_ : 0; }
  int n2() const { return Order >= 2 ? jet_hess_size(nvars_) : 0; }
  int n3() const { return Order >= 3 ? jet_third_size(nvars_) : 0; }

  int merged_nvars(const Jet& o) const {
    if (nvars_ == 0) return o.nvars_;
    if (o.nvars_ == 0 || o.nvars_ == nvars_) return nvars_;
    throw Error(ErrorCode::ShapeMismatch, "jets with different nvars (" + std::to_string(nvars_) + " vs " +
                                              std::to_string(o.nvars_) + ")");
  }

  template <typename F>
  void for_each_derivative(F&& f, const Jet& o) {
    for (int i = 0; i < n1(); ++i) f(grad_[i], o.grad_[i]);
    for (int p = 0; p < n2(); ++p) f(hess_[p], o.hess_[p]);
    for (int t = 0; t < n3(); ++t) f(third_[t], o.third_[t]);
  }

  void zero_derivatives() {
    grad_.fill(Scalar(0));
    hess_.fill(Scalar(0));
    third_.fill(Scalar(0));
  }

  int nvars_ = 0;
  Scalar value_;
  std::array<Scalar, kGrad> grad_;
  std::array<Scalar, kHess> hess_;
  std::array<Scalar, kThird> third_;
};

using Jet3 = Jet<double, 3>;

inline Jet3 jet_variable(int index, double value, int nvars) { return Jet3::variable(index, value, nvars); }
inline Jet3 jet_constant(double value) { return Jet3::constant(value); }

inline double value_of(double x) { return x; }
template <typename S, int O>
double value_of(const Jet<S, O>& j) {
  return value_of(j.value());
}

// Mixed jet/scalar arithmetic.
template <typename S, int O, typename T, std::enable_if_t<std::is_arithmetic_v<T>, int> = 0>
Jet<S, O> operator*(const Jet<S, O>& f, T s) {
  return f.scaled(S(static_cast<double>(s)));
}
template <typename S, int O, typename T, std::enable_if_t<std::is_arithmetic_v<T>, int> = 0>
Jet<S, O> operator*(T s, const Jet<S, O>& f) {
  return f.scaled(S(static_cast<double>(s)));
}
template <typename S, int O, typename T, std::enable_if_t<std::is_arithmetic_v<T>, int> = 0>
Jet<S, O> operator/(const Jet<S, O>& f, T s) {
  if (s == T(0)) throw Error(ErrorCode::DivisionSingularity, "division of a jet by zero");
  return f.scaled(S(1.0 / static_cast<double>(s)));
}
template <typename S, int O, typename T, std::enable_if_t<std::is_arithmetic_v<T>, int> = 0>
Jet<S, O> operator+(Jet<S, O> f, T s) {
  f.value() += S(static_cast<double>(s));
  return f;
}
template <typename S, int O, typename T, std::enable_if_t<std::is_arithmetic_v<T>, int> = 0>
Jet<S, O> operator+(T s, Jet<S, O> f) {
  f.value() += S(static_cast<double>(s));
  return f;
}
template <typename S, int O, typename T, std::enable_if_t<std::is_arithmetic_v<T>, int> = 0>
Jet<S, O> operator-(Jet<S, O> f, T s) {
  f.value() -= S(static_cast<double>(s));
  return f;
}
template <typename S, int O, typename T, std::enable_if_t<std::is_arithmetic_v<T>, int> = 0>
Jet<S, O> operator-(T s, const Jet<S, O>& f) {
  Jet<S, O> r = -f;
  r.value() += S(static_cast<double>(s));
  return r;
}

/// Copies the components shared by both orders; the rest stay zero.
template <int To, typename S, int From>
Jet<S, To> jet_cast(const Jet<S, From>& j) {
  Jet<S, To> r(j.value());
  const int n = j.nvars();
  r.set_nvars(n);
  if constexpr (To >= 1 && From >= 1)
    for (int i = 0; i < n; ++i) r.grad(i) = j.grad(i);
  if constexpr (To >= 2 && From >= 2)
    for (int p = 0; p < jet_hess_size(n); ++p) r.hess(p) = j.hess(p);
  if constexpr (To >= 3 && From >= 3)
    for (int t = 0; t < jet_third_size(n); ++t) r.third(t) = j.third(t);
  return r;
}

template <typename S, int O>
Jet<S, O> tanh(const Jet<S, O>& z) {
  using std::tanh;
  const S t = tanh(z.value());
  const S f1 = S(1) - t * t;
  const S f2 = S(-2) * t * f1;
  const S f3 = S(-2) * f1 * f1 - S(2) * t * f2;
  return z.compose(t, f1, f2, f3);
}

template <typename S, int O>
Jet<S, O> exp(const Jet<S, O>& z) {
  using std::exp;
  const S e = exp(z.value());
  return z.compose(e, e, e, e);
}

template <typename S, int O>
Jet<S, O> sin(const Jet<S, O>& z) {
  using std::cos;
  using std::sin;
  const S s = sin(z.value());
  const S c = cos(z.value());
  return z.compose(s, c, -s, -c);
}

template <typename S, int O>
Jet<S, O> cos(const Jet<S, O>& z) {
  using std::cos;
  using std::sin;
  const S s = sin(z.value());
  const S c = cos(z.value());
  return z.compose(c, -s, -c, s);
}

template <typename S, int O>
Jet<S, O> sqrt(const Jet<S, O>& z) {
  using std::sqrt;
  if (value_of(z.value()) <= 0.0) throw Error(ErrorCode::DivisionSingularity, "sqrt of a non-positive jet");
  const S r = sqrt(z.value());
  const S inv = S(1) / r;
  const S d1 = S(0.5) * inv;
  const S d2 = S(-0.25) * inv / z.value();
  const S d3 = S(0.375) * inv / (z.value() * z.value());
  return z.compose(r, d1, d2, d3);
}

/// Real power x^a for positive x.
template <typename S, int O>
Jet<S, O> pow(const Jet<S, O>& z, double a) {
  using std::pow;
  if (value_of(z.value()) <= 0.0) throw Error(ErrorCode::DivisionSingularity, "pow of a non-positive jet");
  const S x = z.value();
  const S p0 = pow(x, a);
  const S p1 = S(a) * p0 / x;
  const S p2 = S(a - 1.0) * p1 / x;
  const S p3 = S(a - 2.0) * p2 / x;
  return z.compose(p0, p1, p2, p3);
}

}  // namespace rtnn

namespace Eigen {

template <typename S, int O>
struct NumTraits<rtnn::Jet<S, O>> {
  using Real = rtnn::Jet<S, O>;
  using NonInteger = rtnn::Jet<S, O>;
  using Nested = rtnn::Jet<S, O>;
  using Literal = rtnn::Jet<S, O>;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 4,
    MulCost = 8,
  };
  static Real epsilon() { return Real(std::numeric_limits<double>::epsilon()); }
  static Real dummy_precision() { return Real(1e-12); }
  static Real highest() { return Real(std::numeric_limits<double>::max()); }
  static Real lowest() { return Real(std::numeric_limits<double>::lowest()); }
  static int digits10() { return std::numeric_limits<double>::digits10; }
};

}  // namespace Eigen
