#include "rtnn/autodiff.hpp"

namespace rtnn {
namespace ad {

std::vector<double> Tape::adjoints(const Var& output) const {
  std::vector<double> adj(nodes_.size(), 0.0);
  if (output.is_constant()) return adj;
  if (output.tape() != this) throw Error(ErrorCode::InvalidArgument, "output recorded on a different tape");
  adj[static_cast<std::size_t>(output.index())] = 1.0;
  for (int i = output.index(); i >= 0; --i) {
    const double a = adj[static_cast<std::size_t>(i)];
    if (a == 0.0) continue;
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.a >= 0) adj[static_cast<std::size_t>(n.a)] += n.da * a;
    if (n.b >= 0) adj[static_cast<std::size_t>(n.b)] += n.db * a;
  }
  return adj;
}

}  // namespace ad

double TapedLossProgram::value(const Eigen::VectorXd& params) const {
  std::vector<ad::Var> vars(static_cast<std::size_t>(params.size()));
  for (Eigen::Index k = 0; k < params.size(); ++k) vars[static_cast<std::size_t>(k)] = ad::Var(params(k));
  return fn_(vars).value();
}

double TapedLossProgram::value_and_gradient(const Eigen::VectorXd& params, Eigen::VectorXd& gradient) const {
  if (params.size() != n_) throw Error(ErrorCode::ShapeMismatch, "parameter vector length");
  ad::Tape tape;
  std::vector<ad::Var> vars;
  vars.reserve(static_cast<std::size_t>(n_));
  for (Eigen::Index k = 0; k < n_; ++k) vars.push_back(tape.input(params(k)));
  const ad::Var out = fn_(vars);
  const std::vector<double> adj = tape.adjoints(out);
  gradient.resize(n_);
  for (Eigen::Index k = 0; k < n_; ++k) gradient(k) = adj[static_cast<std::size_t>(vars[static_cast<std::size_t>(k)].index())];
  return out.value();
}

Eigen::VectorXd parameter_gradient(const LossProgram& program, const Eigen::VectorXd& params) {
  Eigen::VectorXd g;
  const double loss = program.value_and_gradient(params, g);
  if (!std::isfinite(loss)) throw Error(ErrorCode::NonFinite, "loss value is not finite");
  for (Eigen::Index k = 0; k < g.size(); ++k)
    if (!std::isfinite(g(k))) throw Error(ErrorCode::NonFinite, "gradient component " + std::to_string(k) + " is not finite");
  return g;
}

}  // namespace rtnn
