#pragma once

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "rtnn/error.hpp"

namespace rtnn::ad {

class Var;

/// Reverse-mode tape. Each node records at most two parents with the local
/// partial derivatives; adjoints are swept in reverse recording order, so two
/// evaluations of the same program produce bit-identical gradients.
class Tape {
 public:
  Var input(double value);

  /// Adjoint of every node with respect to `output`.
  std::vector<double> adjoints(const Var& output) const;

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

  int record(int a, double da, int b, double db) {
    nodes_.push_back({a, b, da, db});
    return static_cast<int>(nodes_.size()) - 1;
  }

 private:
  struct Node {
    int a;
    int b;
    double da;
    double db;
  };
  std::vector<Node> nodes_;
};

/// Scalar recorded on a Tape. A Var without a tape is a constant.
class Var {
 public:
  Var() = default;
  Var(double v) : value_(v) {}  // NOLINT: constants lift implicitly
  template <typename T, std::enable_if_t<std::is_arithmetic_v<T> && !std::is_same_v<T, double>, int> = 0>
  Var(T v) : value_(static_cast<double>(v)) {}  // NOLINT
  Var(Tape* tape, int index, double v) : tape_(tape), index_(index), value_(v) {}

  double value() const { return value_; }
  int index() const { return index_; }
  Tape* tape() const { return tape_; }
  bool is_constant() const { return tape_ == nullptr; }

  Var& operator+=(const Var& o) { return *this = *this + o; }
  Var& operator-=(const Var& o) { return *this = *this - o; }
  Var& operator*=(const Var& o) { return *this = *this * o; }
  Var& operator/=(const Var& o) { return *this = *this / o; }

  friend Var operator+(const Var& a, const Var& b) { return binary(a, b, a.value_ + b.value_, 1.0, 1.0); }
  friend Var operator-(const Var& a, const Var& b) { return binary(a, b, a.value_ - b.value_, 1.0, -1.0); }
  friend Var operator*(const Var& a, const Var& b) { return binary(a, b, a.value_ * b.value_, b.value_, a.value_); }
  friend Var operator/(const Var& a, const Var& b) {
    const double inv = 1.0 / b.value_;
    return binary(a, b, a.value_ * inv, inv, -a.value_ * inv * inv);
  }
  Var operator-() const { return unary(*this, -value_, -1.0); }

  friend bool operator<(const Var& a, const Var& b) { return a.value_ < b.value_; }
  friend bool operator>(const Var& a, const Var& b) { return a.value_ > b.value_; }
  friend bool operator<=(const Var& a, const Var& b) { return a.value_ <= b.value_; }
  friend bool operator>=(const Var& a, const Var& b) { return a.value_ >= b.value_; }
  friend bool operator==(const Var& a, const Var& b) { return a.value_ == b.value_; }
  friend bool operator!=(const Var& a, const Var& b) { return a.value_ != b.value_; }

  static Var unary(const Var& x, double v, double dx) {
    if (x.is_constant()) return Var(v);
    return Var(x.tape_, x.tape_->record(x.index_, dx, -1, 0.0), v);
  }

  static Var binary(const Var& a, const Var& b, double v, double da, double db) {
    if (a.is_constant() && b.is_constant()) return Var(v);
    if (a.is_constant()) return Var(b.tape_, b.tape_->record(b.index_, db, -1, 0.0), v);
    if (b.is_constant()) return Var(a.tape_, a.tape_->record(a.index_, da, -1, 0.0), v);
    return Var(a.tape_, a.tape_->record(a.index_, da, b.index_, db), v);
  }

 private:
  Tape* tape_ = nullptr;
  int index_ = -1;
  double value_ = 0.0;
};

inline Var Tape::input(double value) { return Var(this, record(-1, 0.0, -1, 0.0), value); }

inline double value_of(const Var& v) { return v.value(); }

inline Var tanh(const Var& x) {
  const double t = std::tanh(x.value());
  return Var::unary(x, t, 1.0 - t * t);
}
inline Var exp(const Var& x) {
  const double e = std::exp(x.value());
  return Var::unary(x, e, e);
}
inline Var log(const Var& x) { return Var::unary(x, std::log(x.value()), 1.0 / x.value()); }
inline Var sin(const Var& x) { return Var::unary(x, std::sin(x.value()), std::cos(x.value())); }
inline Var cos(const Var& x) { return Var::unary(x, std::cos(x.value()), -std::sin(x.value())); }
inline Var sqrt(const Var& x) {
  const double r = std::sqrt(x.value());
  return Var::unary(x, r, 0.5 / r);
}
inline Var pow(const Var& x, double a) {
  const double p = std::pow(x.value(), a);
  return Var::unary(x, p, a * std::pow(x.value(), a - 1.0));
}
inline Var abs(const Var& x) { return Var::unary(x, std::abs(x.value()), x.value() < 0.0 ? -1.0 : 1.0); }

}  // namespace rtnn::ad

namespace Eigen {

template <>
struct NumTraits<rtnn::ad::Var> {
  using Real = rtnn::ad::Var;
  using NonInteger = rtnn::ad::Var;
  using Nested = rtnn::ad::Var;
  using Literal = rtnn::ad::Var;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 2,
    MulCost = 2,
  };
  static Real epsilon() { return Real(std::numeric_limits<double>::epsilon()); }
  static Real dummy_precision() { return Real(1e-12); }
  static Real highest() { return Real(std::numeric_limits<double>::max()); }
  static Real lowest() { return Real(std::numeric_limits<double>::lowest()); }
  static int digits10() { return std::numeric_limits<double>::digits10; }
};

}  // namespace Eigen

namespace rtnn {

/// Scalar loss over a flat parameter vector whose parameter gradient is
/// accumulated by adjoint sweeps.
class LossProgram {
 public:
  virtual ~LossProgram() = default;
  virtual Eigen::Index parameter_count() const = 0;
  virtual double value(const Eigen::VectorXd& params) const = 0;
  virtual double value_and_gradient(const Eigen::VectorXd& params, Eigen::VectorXd& gradient) const = 0;
};

/// LossProgram recorded on an ad::Tape from a callable over parameter Vars.
class TapedLossProgram : public LossProgram {
 public:
  using Function = std::function<ad::Var(std::span<const ad::Var>)>;

  TapedLossProgram(Eigen::Index parameter_count, Function fn) : n_(parameter_count), fn_(std::move(fn)) {}

  Eigen::Index parameter_count() const override { return n_; }
  double value(const Eigen::VectorXd& params) const override;
  double value_and_gradient(const Eigen::VectorXd& params, Eigen::VectorXd& gradient) const override;

 private:
  Eigen::Index n_;
  Function fn_;
};

/// d(loss)/d(params); throws NonFinite naming the offending component.
Eigen::VectorXd parameter_gradient(const LossProgram& program, const Eigen::VectorXd& params);

}  // namespace rtnn
