#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <map>
#include <vector>

#include "rtnn/error.hpp"

namespace rtnn {

/// Ordered index pair (p < q) naming the 2-form e_p* ^ e_q*.
struct IndexPair {
  int p = 0;
  int q = 0;
  friend bool operator==(const IndexPair&, const IndexPair&) = default;
};

/// Lexicographic basis of 2-forms on N-dimensional space-time.
///
/// Form k evaluates to +1 on the ordered pair (p, q), -1 on (q, p) and 0
/// on every other index pair.
class TwoFormBasis {
 public:
  TwoFormBasis() = default;
  TwoFormBasis(int dim, std::vector<IndexPair> pairs) : dim_(dim), pairs_(std::move(pairs)) {}

  int dim() const { return dim_; }
  /// Number of forms, m = N(N-1)/2.
  int size() const { return static_cast<int>(pairs_.size()); }
  const std::vector<IndexPair>& pairs() const { return pairs_; }

  /// Value of form `k` (0-based) on the ordered index pair (a, b).
  int evaluate(int k, int a, int b) const {
    const IndexPair& f = pairs_[static_cast<std::size_t>(k)];
    if (a == f.p && b == f.q) return 1;
    if (a == f.q && b == f.p) return -1;
    return 0;
  }

  bool contains_index(int k, int index) const {
    const IndexPair& f = pairs_[static_cast<std::size_t>(k)];
    return f.p == index || f.q == index;
  }

 private:
  int dim_ = 0;
  std::vector<IndexPair> pairs_;
};

TwoFormBasis enumerate_two_forms(int dim);

/// Coefficient slot (i, j), 1-based, i <= j.
struct Slot {
  int i = 1;
  int j = 1;
  friend bool operator==(const Slot&, const Slot&) = default;
  friend auto operator<=>(const Slot&, const Slot&) = default;
};

/// All slots 1 <= i <= j <= m in lexicographic order.
std::vector<Slot> coefficient_slots(int m);

/// Position of `slot` in the lexicographic enumeration of coefficient_slots(m).
int slot_position(const Slot& slot, int m);

/// Dense (0,4)-tensor with N^4 row-major entries.
template <typename Scalar>
class DenseTensor4 {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  DenseTensor4() = default;
  explicit DenseTensor4(int dim) : dim_(dim), data_(Vector::Zero(static_cast<Eigen::Index>(dim) * dim * dim * dim)) {}

  int dim() const { return dim_; }

  Scalar& operator()(int a, int b, int c, int d) { return data_(offset(a, b, c, d)); }
  const Scalar& operator()(int a, int b, int c, int d) const { return data_(offset(a, b, c, d)); }

  const Vector& flat() const { return data_; }
  Vector& flat() { return data_; }

 private:
  Eigen::Index offset(int a, int b, int c, int d) const {
    return ((static_cast<Eigen::Index>(a) * dim_ + b) * dim_ + c) * dim_ + d;
  }

  int dim_ = 0;
  Vector data_;
};

using Quadruple = std::array<int, 4>;

/// Basis element T^(i,j)_abcd = w_i[a,b] w_j[c,d] + w_j[a,b] w_i[c,d], stored sparsely.
class RiemannBasisTensor {
 public:
  RiemannBasisTensor(int dim, Slot slot, std::map<Quadruple, int> entries)
      : dim_(dim), slot_(slot), entries_(std::move(entries)) {}

  int dim() const { return dim_; }
  Slot slot() const { return slot_; }
  const std::map<Quadruple, int>& entries() const { return entries_; }

  int operator()(int a, int b, int c, int d) const {
    auto it = entries_.find(Quadruple{a, b, c, d});
    return it == entries_.end() ? 0 : it->second;
  }

  template <typename Scalar = double>
  DenseTensor4<Scalar> dense() const {
    DenseTensor4<Scalar> out(dim_);
    for (const auto& [q, v] : entries_) out(q[0], q[1], q[2], q[3]) = Scalar(v);
    return out;
  }

 private:
  int dim_;
  Slot slot_;
  std::map<Quadruple, int> entries_;
};

/// m(m+1)/2 basis tensors, one per slot in lexicographic order.
std::vector<RiemannBasisTensor> build_riemann_basis(const TwoFormBasis& basis);

/// True iff the tensor is antisymmetric in (a,b), in (c,d) and symmetric under
/// pair exchange, compared exactly.
template <typename Scalar>
bool check_riemann_symmetries(const DenseTensor4<Scalar>& t, int dim) {
  if (t.dim() != dim) throw Error(ErrorCode::ShapeMismatch, "tensor dimension does not match");
  for (int a = 0; a < dim; ++a)
    for (int b = 0; b < dim; ++b)
      for (int c = 0; c < dim; ++c)
        for (int d = 0; d < dim; ++d) {
          const Scalar v = t(a, b, c, d);
          if (v != -t(b, a, c, d)) return false;
          if (v != -t(a, b, d, c)) return false;
          if (v != t(c, d, a, b)) return false;
        }
  return true;
}

bool check_riemann_symmetries(const RiemannBasisTensor& t, int dim);

/// Coefficients k_ij with sum k_ij T^(i,j) == t; throws NotRiemannLike if the
/// symmetry check fails.
Eigen::VectorXd expand_in_basis(const DenseTensor4<double>& t, const std::vector<RiemannBasisTensor>& basis_tensors);

/// Inverse of expand_in_basis.
DenseTensor4<double> synthesize(const Eigen::VectorXd& coefficients,
                                const std::vector<RiemannBasisTensor>& basis_tensors);

}  // namespace rtnn
