#include "rtnn/tensor_basis.hpp"

#include <string>

namespace rtnn {

TwoFormBasis enumerate_two_forms(int dim) {
  if (dim < 2) throw Error(ErrorCode::InvalidDimension, "space-time dimension must be >= 2, got " + std::to_string(dim));
  std::vector<IndexPair> pairs;
  for (int p = 0; p < dim; ++p)
    for (int q = p + 1; q < dim; ++q) pairs.push_back({p, q});
  return TwoFormBasis(dim, std::move(pairs));
}

std::vector<Slot> coefficient_slots(int m) {
  std::vector<Slot> slots;
  for (int i = 1; i <= m; ++i)
    for (int j = i; j <= m; ++j) slots.push_back({i, j});
  return slots;
}

int slot_position(const Slot& slot, int m) {
  if (slot.i < 1 || slot.j < slot.i || slot.j > m)
    throw Error(ErrorCode::IndexOutOfRange, "slot (" + std::to_string(slot.i) + "," + std::to_string(slot.j) + ")");
  // rows 1..i-1 hold m, m-1, ..., m-i+2 slots
  const int before = (slot.i - 1) * m - (slot.i - 1) * (slot.i - 2) / 2;
  return before + (slot.j - slot.i);
}

std::vector<RiemannBasisTensor> build_riemann_basis(const TwoFormBasis& basis) {
  const int n = basis.dim();
  std::vector<RiemannBasisTensor> out;
  for (const Slot& s : coefficient_slots(basis.size())) {
    const int fi = s.i - 1;
    const int fj = s.j - 1;
    std::map<Quadruple, int> entries;
    // Only index pairs on which a form is nonzero contribute.
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        const int wi_ab = basis.evaluate(fi, a, b);
        const int wj_ab = basis.evaluate(fj, a, b);
        if (wi_ab == 0 && wj_ab == 0) continue;
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d) {
            const int v = wi_ab * basis.evaluate(fj, c, d) + wj_ab * basis.evaluate(fi, c, d);
            if (v != 0) entries[{a, b, c, d}] = v;
          }
      }
    out.emplace_back(n, s, std::move(entries));
  }
  return out;
}

bool check_riemann_symmetries(const RiemannBasisTensor& t, int dim) {
  return check_riemann_symmetries(t.dense<int>(), dim);
}

Eigen::VectorXd expand_in_basis(const DenseTensor4<double>& t, const std::vector<RiemannBasisTensor>& basis_tensors) {
  const int n = t.dim();
  if (!check_riemann_symmetries(t, n)) throw Error(ErrorCode::NotRiemannLike, "input tensor violates Riemann-like symmetries");
  const TwoFormBasis forms = enumerate_two_forms(n);
  const int m = forms.size();
  if (static_cast<int>(basis_tensors.size()) != m * (m + 1) / 2)
    throw Error(ErrorCode::ShapeMismatch, "basis size does not match tensor dimension");

  // T^(i,j) evaluated on (pair_k, pair_l) equals d_ik d_jl + d_jk d_il, so the
  // coefficients are read off the bilinear form on the pair basis.
  Eigen::VectorXd kappa(static_cast<Eigen::Index>(basis_tensors.size()));
  for (std::size_t s = 0; s < basis_tensors.size(); ++s) {
    const Slot slot = basis_tensors[s].slot();
    const IndexPair& pi = forms.pairs()[static_cast<std::size_t>(slot.i - 1)];
    const IndexPair& pj = forms.pairs()[static_cast<std::size_t>(slot.j - 1)];
    const double v = t(pi.p, pi.q, pj.p, pj.q);
    kappa(static_cast<Eigen::Index>(s)) = slot.i == slot.j ? 0.5 * v : v;
  }
  return kappa;
}

DenseTensor4<double> synthesize(const Eigen::VectorXd& coefficients,
                                const std::vector<RiemannBasisTensor>& basis_tensors) {
  if (basis_tensors.empty()) throw Error(ErrorCode::InvalidArgument, "empty basis");
  if (coefficients.size() != static_cast<Eigen::Index>(basis_tensors.size()))
    throw Error(ErrorCode::ShapeMismatch, "coefficient vector length does not match basis");
  DenseTensor4<double> out(basis_tensors.front().dim());
  for (std::size_t s = 0; s < basis_tensors.size(); ++s) {
    const double k = coefficients(static_cast<Eigen::Index>(s));
    if (k == 0.0) continue;
    for (const auto& [q, v] : basis_tensors[s].entries()) out(q[0], q[1], q[2], q[3]) += k * v;
  }
  return out;
}

}  // namespace rtnn
