#include "rtnn/network.hpp"

#include <cmath>
#include <random>
#include <string>

namespace rtnn {

namespace {

// Portable uniform draw in [0, 1) from the top 53 bits.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

Eigen::Index parameter_count(const std::vector<int>& widths) {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += static_cast<Eigen::Index>(widths[l]) * widths[l + 1] + widths[l + 1];
  return n;
}

CoefficientNetwork::CoefficientNetwork(std::vector<int> widths, std::uint64_t seed)
    : widths_(std::move(widths)), seed_(seed) {
  if (widths_.size() < 2) throw Error(ErrorCode::InvalidArgument, "network needs an input and an output width");
  for (int w : widths_)
    if (w < 1) throw Error(ErrorCode::InvalidArgument, "layer widths must be >= 1");
  Eigen::Index off = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    offsets_.push_back(off);
    off += static_cast<Eigen::Index>(widths_[l]) * widths_[l + 1] + widths_[l + 1];
  }
  params_ = Eigen::VectorXd::Zero(off);
  input_offset_ = Eigen::VectorXd::Zero(widths_.front());
  input_scale_ = Eigen::VectorXd::Ones(widths_.front());
}

void CoefficientNetwork::set_parameters(const Eigen::VectorXd& p) {
  if (p.size() != params_.size())
    throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(params_.size()) + " parameters, got " +
                                              std::to_string(p.size()));
  params_ = p;
}

Eigen::Map<const Eigen::MatrixXd> CoefficientNetwork::weight(int l) const {
  const auto lu = static_cast<std::size_t>(l);
  return {params_.data() + offsets_[lu], widths_[lu + 1], widths_[lu]};
}

Eigen::Map<Eigen::MatrixXd> CoefficientNetwork::weight(int l) {
  const auto lu = static_cast<std::size_t>(l);
  return {params_.data() + offsets_[lu], widths_[lu + 1], widths_[lu]};
}

Eigen::Map<const Eigen::VectorXd> CoefficientNetwork::bias(int l) const {
  const auto lu = static_cast<std::size_t>(l);
  return {params_.data() + offsets_[lu] + static_cast<Eigen::Index>(widths_[lu + 1]) * widths_[lu], widths_[lu + 1]};
}

Eigen::Map<Eigen::VectorXd> CoefficientNetwork::bias(int l) {
  const auto lu = static_cast<std::size_t>(l);
  return {params_.data() + offsets_[lu] + static_cast<Eigen::Index>(widths_[lu + 1]) * widths_[lu], widths_[lu + 1]};
}

void CoefficientNetwork::set_input_normalization(const Eigen::VectorXd& offset, const Eigen::VectorXd& scale) {
  if (offset.size() != input_width() || scale.size() != input_width())
    throw Error(ErrorCode::ShapeMismatch, "input normalization length");
  input_offset_ = offset;
  input_scale_ = scale;
}

CoefficientNetwork init_network(const std::vector<int>& widths, std::uint64_t seed) {
  if (widths.empty()) throw Error(ErrorCode::InvalidArgument, "empty layer widths");
  if (widths.size() < 3) throw Error(ErrorCode::InvalidArgument, "network needs at least one hidden layer");
  CoefficientNetwork net(widths, seed);
  std::mt19937_64 rng(seed);
  for (int l = 0; l < net.layer_count(); ++l) {
    auto W = net.weight(l);
    const double limit = std::sqrt(6.0 / static_cast<double>(W.rows() + W.cols()));
    for (Eigen::Index j = 0; j < W.cols(); ++j)
      for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = limit * (2.0 * unit_uniform(rng) - 1.0);
  }
  return net;
}

Eigen::VectorXd forward(const CoefficientNetwork& net, const Eigen::VectorXd& x) {
  if (x.size() != net.input_width())
    throw Error(ErrorCode::ShapeMismatch, "network input has " + std::to_string(x.size()) + " entries, expected " +
                                              std::to_string(net.input_width()));
  Eigen::VectorXd a(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) a(k) = (x(k) - net.input_offset()(k)) * net.input_scale()(k);
  for (int l = 0; l < net.layer_count(); ++l) {
    const auto W = net.weight(l);
    const auto b = net.bias(l);
    const bool hidden = l + 1 < net.layer_count();
    Eigen::VectorXd z(W.rows());
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      double zi = b(i);
      for (Eigen::Index k = 0; k < W.cols(); ++k) zi += a(k) * W(i, k);
      z(i) = hidden ? std::tanh(zi) : zi;
    }
    a = std::move(z);
  }
  return a;
}

}  // namespace rtnn
