#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

#include "rtnn/jet.hpp"

namespace rtnn {

/// Fully connected tanh network; the output layer is linear.
///
/// Parameters live in one flat vector, layer by layer: the column-major
/// weight matrix (fan_out x fan_in) followed by the bias. Inputs pass through
/// a fixed affine map x_hat = (x - input_offset) .* input_scale before the
/// first layer; it is not trained.
class CoefficientNetwork {
 public:
  CoefficientNetwork() = default;
  CoefficientNetwork(std::vector<int> widths, std::uint64_t seed);

  const std::vector<int>& widths() const { return widths_; }
  std::uint64_t seed() const { return seed_; }
  int input_width() const { return widths_.front(); }
  int output_width() const { return widths_.back(); }
  int layer_count() const { return static_cast<int>(widths_.size()) - 1; }

  Eigen::Index parameter_count() const { return params_.size(); }
  const Eigen::VectorXd& parameters() const { return params_; }
  void set_parameters(const Eigen::VectorXd& p);

  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<Eigen::MatrixXd> weight(int layer);
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
  Eigen::Map<Eigen::VectorXd> bias(int layer);
  Eigen::Index weight_offset(int layer) const { return offsets_[static_cast<std::size_t>(layer)]; }

  const Eigen::VectorXd& input_offset() const { return input_offset_; }
  const Eigen::VectorXd& input_scale() const { return input_scale_; }
  void set_input_normalization(const Eigen::VectorXd& offset, const Eigen::VectorXd& scale);

 private:
  std::vector<int> widths_;
  std::uint64_t seed_ = 0;
  Eigen::VectorXd params_;
  std::vector<Eigen::Index> offsets_;
  Eigen::VectorXd input_offset_;
  Eigen::VectorXd input_scale_;
};

/// sum_l (w_l * w_{l+1} + w_{l+1}).
Eigen::Index parameter_count(const std::vector<int>& widths);

/// Glorot-uniform weights (limit sqrt(6 / (fan_in + fan_out))), zero biases.
/// Requires at least one hidden layer.
CoefficientNetwork init_network(const std::vector<int>& widths, std::uint64_t seed);

Eigen::VectorXd forward(const CoefficientNetwork& net, const Eigen::VectorXd& x);

/// Jet-valued forward pass. Uses the same accumulation order as forward(), so
/// the value slice matches it bit for bit.
template <int Order>
std::vector<Jet<double, Order>> forward_jet(const CoefficientNetwork& net, std::span<const Jet<double, Order>> x) {
  using J = Jet<double, Order>;
  if (static_cast<int>(x.size()) != net.input_width())
    throw Error(ErrorCode::ShapeMismatch, "network input has " + std::to_string(x.size()) + " entries, expected " +
                                              std::to_string(net.input_width()));
  const int nv = x.empty() ? 0 : x.front().nvars();
  for (const J& xi : x)
    if (xi.nvars() != nv && xi.nvars() != 0) throw Error(ErrorCode::ShapeMismatch, "input jets disagree on nvars");

  std::vector<J> a(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    a[k] = (x[k] - net.input_offset()(kk)) * net.input_scale()(kk);
  }
  for (int l = 0; l < net.layer_count(); ++l) {
    const auto W = net.weight(l);
    const auto b = net.bias(l);
    const bool hidden = l + 1 < net.layer_count();
    std::vector<J> z(static_cast<std::size_t>(W.rows()));
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      J zi(b(i));
      for (Eigen::Index k = 0; k < W.cols(); ++k) zi += a[static_cast<std::size_t>(k)] * W(i, k);
      z[static_cast<std::size_t>(i)] = hidden ? tanh(zi) : zi;
    }
    a = std::move(z);
  }
  return a;
}

/// Seeds one jet per coordinate: jet k is variable k of x.size() variables.
template <int Order>
std::vector<Jet<double, Order>> seed_jets(const Eigen::VectorXd& x) {
  std::vector<Jet<double, Order>> out;
  const int n = static_cast<int>(x.size());
  for (int k = 0; k < n; ++k) out.push_back(Jet<double, Order>::variable(k, x(k), n));
  return out;
}

}  // namespace rtnn
