#include "rtnn/training.hpp"

#include <limits>

#include "rtnn/jet_batch.hpp"

namespace rtnn {

void normalize_to_domain(CoefficientNetwork& net, const Box& box) {
  const Eigen::VectorXd offset = 0.5 * (box.lo + box.hi);
  const Eigen::VectorXd scale = 2.0 * (box.hi - box.lo).cwiseInverse();
  net.set_input_normalization(offset, scale);
}

RtnnModel::RtnnModel(const ProblemSpec& problem, const std::vector<int>& hidden, std::uint64_t seed,
                     bool identity_offset)
    : problem_(problem), identity_offset_(identity_offset) {
  problem_.validate();
  if (hidden.empty()) throw Error(ErrorCode::InvalidArgument, "model needs at least one hidden layer");
  const int N = problem_.dim();
  plan_ = problem_.incompressible() ? AssemblyPlan::incompressible(N) : AssemblyPlan::full(N);
  std::vector<int> widths{N};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(plan_.slot_count());
  net_ = init_network(widths, seed);
  normalize_to_domain(net_, problem_.domain());
  if (problem_.has_potential()) {
    widths.back() = 1;
    potential_ = init_network(widths, seed + 1);
    normalize_to_domain(*potential_, problem_.domain());
  }
}

RtnnModel::RtnnModel(const ProblemSpec& problem, AssemblyPlan plan, bool identity_offset, CoefficientNetwork net,
                     std::optional<CoefficientNetwork> potential)
    : problem_(problem), plan_(std::move(plan)), identity_offset_(identity_offset), net_(std::move(net)),
      potential_(std::move(potential)) {
  if (plan_.dim() != problem_.dim()) throw Error(ErrorCode::ShapeMismatch, "plan dimension does not match the problem");
  if (net_.input_width() != plan_.dim() || net_.output_width() != plan_.slot_count())
    throw Error(ErrorCode::ShapeMismatch, "network widths do not match the slot map");
  if (problem_.has_potential() != potential_.has_value())
    throw Error(ErrorCode::ShapeMismatch, "potential network presence does not match the problem");
  if (potential_ && (potential_->input_width() != plan_.dim() || potential_->output_width() != 1))
    throw Error(ErrorCode::ShapeMismatch, "potential network widths");
}

Eigen::Index RtnnModel::parameter_count() const {
  return net_.parameter_count() + (potential_ ? potential_->parameter_count() : 0);
}

Eigen::VectorXd RtnnModel::parameters() const {
  Eigen::VectorXd p(parameter_count());
  p.head(net_.parameter_count()) = net_.parameters();
  if (potential_) p.tail(potential_->parameter_count()) = potential_->parameters();
  return p;
}

void RtnnModel::set_parameters(const Eigen::VectorXd& p) {
  if (p.size() != parameter_count()) throw Error(ErrorCode::ShapeMismatch, "model parameter vector length");
  net_.set_parameters(p.head(net_.parameter_count()));
  if (potential_) potential_->set_parameters(p.tail(potential_->parameter_count()));
}

Eigen::VectorXd RtnnModel::predict_fields(const Eigen::VectorXd& x) const {
  const Eigen::MatrixXd Sv = tensor(x);
  const int N = plan_.dim();
  MatrixX<Jet<double, 1>> S(N, N);
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b) S(a, b) = Jet<double, 1>(Sv(a, b));
  Jet<double, 3> psi;
  if (potential_) {
    const auto in = seed_jets<2>(x);
    psi = jet_cast<3>(forward_jet<2>(*potential_, std::span<const Jet<double, 2>>(in))[0]);
  }
  return point_fields<double>(problem_, S, psi);
}

Eigen::MatrixXd RtnnModel::predict_fields(const Eigen::MatrixXd& points) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(problem_.field_names().size()), points.cols());
  for (Eigen::Index p = 0; p < points.cols(); ++p) out.col(p) = predict_fields(Eigen::VectorXd(points.col(p)));
  return out;
}

RtnnLoss::RtnnLoss(RtnnModel model, std::vector<LossGroup> groups, int chunk_size)
    : model_(std::move(model)), groups_(std::move(groups)), chunk_size_(chunk_size) {
  if (chunk_size_ < 1) throw Error(ErrorCode::InvalidArgument, "chunk size must be >= 1");
  const int N = model_.plan().dim();
  for (const LossGroup& g : groups_) {
    if (g.points.rows() != N) throw Error(ErrorCode::ShapeMismatch, "group '" + g.name + "' has wrong point dimension");
    switch (g.kind) {
      case LossGroup::Kind::Interior: break;
      case LossGroup::Kind::FieldTarget:
        if (g.targets.cols() != g.points.cols() || g.targets.rows() != 4)
          throw Error(ErrorCode::InvalidArgument, "group '" + g.name + "' is missing targets");
        break;
      case LossGroup::Kind::PeriodicPair:
        if (g.partners.rows() != N || g.partners.cols() != g.points.cols())
          throw Error(ErrorCode::InvalidArgument, "group '" + g.name + "' is missing partner points");
        break;
      case LossGroup::Kind::TensorTarget:
        if (g.targets.cols() != g.points.cols() || g.targets.rows() != N * N)
          throw Error(ErrorCode::InvalidArgument, "group '" + g.name + "' is missing tensor targets");
        break;
    }
  }
}

RtnnLoss RtnnLoss::for_problem(const RtnnModel& model, const CollocationSet& colloc, const LossWeights& w,
                               int chunk_size) {
  std::vector<LossGroup> groups;
  groups.push_back({LossGroup::Kind::Interior, "interior", colloc.interior, {}, {}, w.interior});
  if (colloc.boundary.cols() > 0)
    groups.push_back({LossGroup::Kind::FieldTarget, "boundary", colloc.boundary, {}, colloc.boundary_targets, w.boundary});
  groups.push_back({LossGroup::Kind::FieldTarget, "initial", colloc.initial, {}, colloc.initial_targets, w.initial});
  if (colloc.periodic_a.cols() > 0)
    groups.push_back({LossGroup::Kind::PeriodicPair, "periodic", colloc.periodic_a, colloc.periodic_b, {}, w.periodic});
  return RtnnLoss(model, std::move(groups), chunk_size);
}

RtnnLoss RtnnLoss::tensor_regression(const RtnnModel& model, const Eigen::MatrixXd& points,
                                     const Eigen::MatrixXd& targets, int chunk_size) {
  std::vector<LossGroup> groups;
  groups.push_back({LossGroup::Kind::TensorTarget, "tensor", points, {}, targets, 1.0});
  return RtnnLoss(model, std::move(groups), chunk_size);
}

double RtnnLoss::value(const Eigen::VectorXd& params) const { return evaluate(params, nullptr, nullptr); }

double RtnnLoss::value_and_gradient(const Eigen::VectorXd& params, Eigen::VectorXd& gradient) const {
  gradient = Eigen::VectorXd::Zero(parameter_count());
  const double v = evaluate(params, &gradient, nullptr);
  if (!std::isfinite(v)) gradient.setZero();
  return v;
}

std::vector<double> RtnnLoss::group_values(const Eigen::VectorXd& params) const {
  std::vector<double> out;
  evaluate(params, nullptr, &out);
  return out;
}

namespace {

/// Adjoint destinations of the tape inputs of one term.
struct InputSink {
  std::vector<std::pair<int, double*>> slots;
};

template <typename T>
struct InputFactory;

template <>
struct InputFactory<double> {
  static double make(ad::Tape*, InputSink*, double v, double*) { return v; }
};

template <>
struct InputFactory<ad::Var> {
  static ad::Var make(ad::Tape* tape, InputSink* sink, double v, double* dst) {
    ad::Var x = tape->input(v);
    sink->slots.emplace_back(x.index(), dst);
    return x;
  }
};

/// Batched quantities of one chunk; *_bar hold the adjoints.
struct ChunkData {
  int N = 0;
  int nsym = 0;
  bool derivs = false;
  bool psi = false;
  Eigen::MatrixXd SS, DS, SS_bar, DS_bar;
  const JetBatch* Psi = nullptr;
  JetBatch Psi_bar;
};

template <typename T>
struct PointInputs {
  MatrixX<Jet<T, 1>> S;
  Jet<T, 3> psi;
};

template <typename T>
PointInputs<T> gather_point(ChunkData& c, const AssemblyPlan& plan, int p, ad::Tape* tape, InputSink* sink,
                            bool psi_full) {
  using F = InputFactory<T>;
  PointInputs<T> in;
  in.S.resize(c.N, c.N);
  for (int k = 0; k < c.nsym; ++k) {
    const auto [a, b] = plan.entry(k);
    Jet<T, 1> j(F::make(tape, sink, c.SS(k, p), &c.SS_bar(k, p)));
    if (c.derivs) {
      j.set_nvars(c.N);
      for (int e = 0; e < c.N; ++e) {
        const Eigen::Index r = static_cast<Eigen::Index>(e) * c.nsym + k;
        j.grad(e) = F::make(tape, sink, c.DS(r, p), &c.DS_bar(r, p));
      }
    }
    in.S(a, b) = j;
    in.S(b, a) = j;
  }
  if (c.psi) {
    const JetBatch& P = *c.Psi;
    auto comp = [&](int k) { return F::make(tape, sink, P.component(k)(0, p), &c.Psi_bar.component(k)(0, p)); };
    Jet<T, 3> j(comp(0));
    j.set_nvars(c.N);
    for (int i = 0; i < c.N; ++i) j.grad(i) = comp(P.grad_index(i));
    if (psi_full) {
      for (int q = 0; q < jet_hess_size(c.N); ++q) j.hess(q) = comp(1 + c.N + q);
      for (int t = 0; t < jet_third_size(c.N); ++t) j.third(t) = comp(1 + c.N + jet_hess_size(c.N) + t);
    }
    in.psi = j;
  }
  return in;
}

template <typename T>
T term_value(const LossGroup& g, const ProblemSpec& problem, ChunkData& c, const AssemblyPlan& plan, int p,
             int partner, Eigen::Index term, ad::Tape* tape, InputSink* sink) {
  switch (g.kind) {
    case LossGroup::Kind::Interior: {
      const auto in = gather_point<T>(c, plan, p, tape, sink, true);
      return interior_residual<T>(problem, in.S, in.psi);
    }
    case LossGroup::Kind::FieldTarget: {
      const auto in = gather_point<T>(c, plan, p, tape, sink, false);
      const VectorX<T> f = point_fields<T>(problem, in.S, in.psi);
      T s(0.0);
      for (Eigen::Index i = 0; i < f.size(); ++i) {
        const T d = f(i) - g.targets(i, term);
        s += d * d;
      }
      return s;
    }
    case LossGroup::Kind::PeriodicPair: {
      const auto a = gather_point<T>(c, plan, p, tape, sink, false);
      const auto b = gather_point<T>(c, plan, partner, tape, sink, false);
      T s(0.0);
      for (int k = 0; k < c.nsym; ++k) {
        const auto [i, j] = plan.entry(k);
        const T d = a.S(i, j).value() - b.S(i, j).value();
        s += d * d;
      }
      if (c.psi) {
        const auto Ba = magnetic_field(a.psi);
        const auto Bb = magnetic_field(b.psi);
        for (int i = 0; i < 2; ++i) {
          const T d = Ba(i).value() - Bb(i).value();
          s += d * d;
        }
      }
      return s;
    }
    case LossGroup::Kind::TensorTarget: {
      const auto in = gather_point<T>(c, plan, p, tape, sink, false);
      T s(0.0);
      for (int j = 0; j < c.N; ++j)
        for (int i = 0; i < c.N; ++i) {
          const T d = in.S(i, j).value() - g.targets(static_cast<Eigen::Index>(j) * c.N + i, term);
          s += d * d;
        }
      return s;
    }
  }
  return T(0.0);
}

}  // namespace

double RtnnLoss::evaluate(const Eigen::VectorXd& params, Eigen::VectorXd* gradient,
                          std::vector<double>* per_group) const {
  model_.set_parameters(params);
  const AssemblyPlan& plan = model_.plan();
  const CoefficientNetwork& net = model_.net();
  const bool has_psi = model_.has_potential();
  const int N = plan.dim();
  const int nsym = plan.entry_count();
  const Eigen::Index n_net = net.parameter_count();

  std::vector<double> all_terms;
  NetworkJetPass& pass = pass_;
  NetworkJetPass& psi_pass = psi_pass_;
  JetBatch& C_bar = c_bar_;
  try {
    for (const LossGroup& g : groups_) {
      std::vector<double> group_terms;
      group_terms.reserve(static_cast<std::size_t>(g.term_count()));
      const double w = g.weight / static_cast<double>(std::max<Eigen::Index>(1, g.term_count()));
      const bool pair = g.kind == LossGroup::Kind::PeriodicPair;
      const int order = g.kind == LossGroup::Kind::Interior ? 3 : 2;
      for (Eigen::Index start = 0; start < g.term_count(); start += chunk_size_) {
        const Eigen::Index cnt = std::min<Eigen::Index>(chunk_size_, g.term_count() - start);
        Eigen::MatrixXd pts(N, pair ? 2 * cnt : cnt);
        pts.leftCols(cnt) = g.points.middleCols(start, cnt);
        if (pair) pts.rightCols(cnt) = g.partners.middleCols(start, cnt);
        const int P = static_cast<int>(pts.cols());

        pass.forward(net, pts, order);
        const JetBatch& C = pass.output();
        ChunkData c;
        c.N = N;
        c.nsym = nsym;
        c.derivs = order >= 3;
        c.psi = has_psi;
        c.SS = Eigen::MatrixXd::Zero(nsym, P);
        if (c.derivs) c.DS = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N) * nsym, P);
        for (int k = 0; k < nsym; ++k) {
          for (const auto& t : plan.terms(k)) {
            c.SS.row(k) += t.coefficient * C.component(C.hess_index(t.c, t.d)).row(t.slot);
            if (c.derivs)
              for (int e = 0; e < N; ++e)
                c.DS.row(static_cast<Eigen::Index>(e) * nsym + k) +=
                    t.coefficient * C.component(C.third_index(e, t.c, t.d)).row(t.slot);
          }
          const auto [a, b] = plan.entry(k);
          if (model_.identity_offset() && a == b) c.SS.row(k).array() += 1.0;
        }
        if (has_psi) {
          psi_pass.forward(model_.potential(), pts, order);
          c.Psi = &psi_pass.output();
        }
        c.SS_bar = Eigen::MatrixXd::Zero(c.SS.rows(), c.SS.cols());
        c.DS_bar = Eigen::MatrixXd::Zero(c.DS.rows(), c.DS.cols());
        if (has_psi) c.Psi_bar = JetBatch(1, P, c.Psi->nvars(), c.Psi->order());

        for (Eigen::Index q = 0; q < cnt; ++q) {
          const int p = static_cast<int>(q);
          const int partner = pair ? static_cast<int>(cnt + q) : -1;
          const Eigen::Index term = start + q;
          double v;
          if (gradient) {
            tape_.clear();
            InputSink sink;
            const ad::Var out = term_value<ad::Var>(g, model_.problem(), c, plan, p, partner, term, &tape_, &sink);
            v = out.value();
            if (!out.is_constant()) {
              const std::vector<double> adj = tape_.adjoints(out);
              for (const auto& [idx, dst] : sink.slots) *dst += w * adj[static_cast<std::size_t>(idx)];
            }
          } else {
            v = term_value<double>(g, model_.problem(), c, plan, p, partner, term, nullptr, nullptr);
          }
          if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "loss term in group '" + g.name + "'");
          group_terms.push_back(w * v);
        }

        if (gradient) {
          C_bar.reshape(C.width(), P, C.nvars(), C.order());
          C_bar.data().setZero();
          for (int k = 0; k < nsym; ++k)
            for (const auto& t : plan.terms(k)) {
              C_bar.component(C.hess_index(t.c, t.d)).row(t.slot) += t.coefficient * c.SS_bar.row(k);
              if (c.derivs)
                for (int e = 0; e < N; ++e)
                  C_bar.component(C.third_index(e, t.c, t.d)).row(t.slot) +=
                      t.coefficient * c.DS_bar.row(static_cast<Eigen::Index>(e) * nsym + k);
            }
          pass.backward(net, C_bar.data(), gradient->head(n_net));
          if (has_psi)
            psi_pass.backward(model_.potential(), c.Psi_bar.data(), gradient->tail(gradient->size() - n_net));
        }
      }
      if (per_group) per_group->push_back(pairwise_sum(group_terms));
      all_terms.insert(all_terms.end(), group_terms.begin(), group_terms.end());
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DensityUnderflow && e.code() != ErrorCode::NonFinite &&
        e.code() != ErrorCode::DivisionSingularity)
      throw;
    if (per_group) per_group->assign(groups_.size(), std::numeric_limits<double>::infinity());
    return std::numeric_limits<double>::infinity();
  }
  return pairwise_sum(all_terms);
}

}  // namespace rtnn
