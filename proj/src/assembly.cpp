#include "rtnn/assembly.hpp"

#include <algorithm>

namespace rtnn {

SlotMask incompressibility_mask(const TwoFormBasis& basis) {
  if (basis.dim() < 2) throw Error(ErrorCode::InvalidDimension, "mask needs N >= 2");
  SlotMask mask;
  for (const Slot& s : coefficient_slots(basis.size())) {
    const bool both = basis.contains_index(s.i - 1, 0) && basis.contains_index(s.j - 1, 0);
    (both ? mask.masked : mask.active).push_back(s);
  }
  mask.degenerate = mask.active.empty();
  return mask;
}

AssemblyPlan::AssemblyPlan(const TwoFormBasis& basis, std::vector<Slot> active_slots)
    : dim_(basis.dim()), basis_(basis), slots_(std::move(active_slots)) {
  const int N = dim_;
  const int m = basis.size();
  if (N < 2) throw Error(ErrorCode::InvalidDimension, "assembly needs N >= 2");
  if (N > kMaxJetVars) throw Error(ErrorCode::InvalidDimension, "assembly supports N <= 4");
  for (const Slot& s : slots_)
    if (s.i < 1 || s.j < s.i || s.j > m)
      throw Error(ErrorCode::IndexOutOfRange, "slot (" + std::to_string(s.i) + "," + std::to_string(s.j) +
                                                  ") is not a basis slot for m = " + std::to_string(m));
  for (int a = 0; a < N; ++a)
    for (int b = a; b < N; ++b) entries_.push_back({a, b});
  terms_.resize(entries_.size());

  const std::vector<RiemannBasisTensor> tensors = build_riemann_basis(basis);
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    const auto [a, b] = entries_[k];
    for (std::size_t s = 0; s < slots_.size(); ++s) {
      const RiemannBasisTensor& T = tensors[static_cast<std::size_t>(slot_position(slots_[s], m))];
      for (int c = 0; c < N; ++c)
        for (int d = c; d < N; ++d) {
          const double coef = c == d ? T(a, c, b, d) : T(a, c, b, d) + T(a, d, b, c);
          if (coef != 0.0) terms_[k].push_back({static_cast<int>(s), c, d, coef});
        }
    }
  }
}

AssemblyPlan AssemblyPlan::full(int dim) {
  const TwoFormBasis basis = enumerate_two_forms(dim);
  return AssemblyPlan(basis, coefficient_slots(basis.size()));
}

AssemblyPlan AssemblyPlan::incompressible(int dim) {
  const TwoFormBasis basis = enumerate_two_forms(dim);
  SlotMask mask = incompressibility_mask(basis);
  if (mask.degenerate) throw Error(ErrorCode::InvalidDimension, "incompressibility mask leaves no active slot");
  return AssemblyPlan(basis, std::move(mask.active));
}

int AssemblyPlan::entry_index(int a, int b) const {
  if (a > b) std::swap(a, b);
  if (a < 0 || b >= dim_) throw Error(ErrorCode::IndexOutOfRange, "tensor index outside the plan");
  return a * dim_ - a * (a - 1) / 2 + (b - a);
}

DfstSample assemble(const CoefficientNetwork& net, const AssemblyPlan& plan, const Eigen::VectorXd& x,
                    bool identity_offset) {
  if (x.size() != plan.dim()) throw Error(ErrorCode::ShapeMismatch, "point dimension does not match the plan");
  if (net.output_width() != plan.slot_count())
    throw Error(ErrorCode::ShapeMismatch, "network output width does not match the slot map");
  const auto in = seed_jets<3>(x);
  const auto c = forward_jet<3>(net, std::span<const Jet3>(in));
  DfstSample s = assemble_from_jets<3>(plan, std::span<const Jet3>(c), identity_offset);
  s.x = x;
  return s;
}

Eigen::MatrixXd assemble_value(const CoefficientNetwork& net, const AssemblyPlan& plan, const Eigen::VectorXd& x,
                               bool identity_offset) {
  if (x.size() != plan.dim()) throw Error(ErrorCode::ShapeMismatch, "point dimension does not match the plan");
  if (net.output_width() != plan.slot_count())
    throw Error(ErrorCode::ShapeMismatch, "network output width does not match the slot map");
  const auto in = seed_jets<2>(x);
  const auto c = forward_jet<2>(net, std::span<const Jet<double, 2>>(in));
  return assemble_from_jets<2>(plan, std::span<const Jet<double, 2>>(c), identity_offset).S;
}

Eigen::VectorXd divergence_fd(const TensorField& S, const Eigen::VectorXd& x, double h) {
  const Eigen::Index N = x.size();
  Eigen::VectorXd div = Eigen::VectorXd::Zero(N);
  for (Eigen::Index c = 0; c < N; ++c) {
    Eigen::VectorXd xp = x, xm = x;
    xp(c) += h;
    xm(c) -= h;
    const Eigen::MatrixXd Sp = S(xp), Sm = S(xm);
    for (Eigen::Index b = 0; b < N; ++b) div(b) += (Sp(b, c) - Sm(b, c)) / (2.0 * h);
  }
  return div;
}

Eigen::VectorXd divergence_fd(const CoefficientNetwork& net, const AssemblyPlan& plan, const Eigen::VectorXd& x,
                              double h, bool identity_offset) {
  return divergence_fd([&](const Eigen::VectorXd& y) { return assemble_value(net, plan, y, identity_offset); }, x, h);
}

MhdFields<double> extract_mhd(const DfstSample& sample, const CoefficientNetwork& psi_net, const Eigen::VectorXd& x) {
  if (psi_net.output_width() != 1) throw Error(ErrorCode::ShapeMismatch, "potential network must have one output");
  const auto in = seed_jets<2>(x);
  const auto psi = forward_jet<2>(psi_net, std::span<const Jet<double, 2>>(in));
  const VectorX<Jet<double, 1>> Bj = magnetic_field(psi[0]);
  Eigen::VectorXd B(2);
  B << Bj(0).value(), Bj(1).value();
  return extract_mhd<double>(sample.S, B);
}

}  // namespace rtnn
