#pragma once

#include <Eigen/Dense>

#include <vector>

#include "rtnn/jet.hpp"
#include "rtnn/network.hpp"

namespace rtnn {

/// Jets of `width` quantities at `points` points, stored component-major:
/// block k (width x points) holds jet component k for every point. Component
/// order is value, gradient, canonical Hessian pairs, canonical triples.
class JetBatch {
 public:
  JetBatch() = default;
  JetBatch(int width, int points, int nvars, int order)
      : width_(width), points_(points), nvars_(nvars), order_(order),
        data_(Eigen::MatrixXd::Zero(width, static_cast<Eigen::Index>(points) * jet_component_count(nvars, order))) {}

  /// Changes the shape, reusing storage when the size allows; contents are
  /// unspecified afterwards.
  void reshape(int width, int points, int nvars, int order) {
    width_ = width;
    points_ = points;
    nvars_ = nvars;
    order_ = order;
    data_.resize(width, static_cast<Eigen::Index>(points) * jet_component_count(nvars, order));
  }

  int width() const { return width_; }
  int points() const { return points_; }
  int nvars() const { return nvars_; }
  int order() const { return order_; }
  int components() const { return jet_component_count(nvars_, order_); }

  Eigen::MatrixXd& data() { return data_; }
  const Eigen::MatrixXd& data() const { return data_; }

  auto component(int k) { return data_.middleCols(static_cast<Eigen::Index>(k) * points_, points_); }
  auto component(int k) const { return data_.middleCols(static_cast<Eigen::Index>(k) * points_, points_); }

  int value_index() const { return 0; }
  int grad_index(int i) const { return 1 + i; }
  int hess_index(int i, int j) const { return 1 + nvars_ + kJetLayout.pair_index[i][j]; }
  int third_index(int i, int j, int k) const {
    return 1 + nvars_ + jet_hess_size(nvars_) + kJetLayout.triple_index[i][j][k];
  }

  /// Jet of row `row` at point `p`.
  template <int Order>
  Jet<double, Order> jet(int row, int p) const {
    Jet<double, Order> j(component(0)(row, p));
    j.set_nvars(nvars_);
    if constexpr (Order >= 1)
      for (int i = 0; i < nvars_ && order_ >= 1; ++i) j.grad(i) = component(grad_index(i))(row, p);
    if constexpr (Order >= 2)
      for (int q = 0; q < jet_hess_size(nvars_) && order_ >= 2; ++q) j.hess(q) = component(1 + nvars_ + q)(row, p);
    if constexpr (Order >= 3)
      for (int t = 0; t < jet_third_size(nvars_) && order_ >= 3; ++t)
        j.third(t) = component(1 + nvars_ + jet_hess_size(nvars_) + t)(row, p);
    return j;
  }

 private:
  int width_ = 0;
  int points_ = 0;
  int nvars_ = 0;
  int order_ = 0;
  Eigen::MatrixXd data_;
};

/// Batched jet forward pass through a CoefficientNetwork with a cache for the
/// reverse sweep. Jets are taken with respect to the raw input coordinates.
/// Buffers are kept between calls.
class NetworkJetPass {
 public:
  /// points: input_width x P.
  void forward(const CoefficientNetwork& net, const Eigen::MatrixXd& points, int order);

  const JetBatch& output() const { return output_; }

  /// Accumulates d(loss)/d(params) into `gradient` (length net.parameter_count())
  /// given the adjoint of the output batch.
  void backward(const CoefficientNetwork& net, const Eigen::MatrixXd& output_adjoint,
                Eigen::Ref<Eigen::VectorXd> gradient) const;

 private:
  Eigen::MatrixXd x0_;          // normalized inputs
  std::vector<JetBatch> acts_;  // hidden activations; acts_[l] feeds layer l >= 1
  std::vector<JetBatch> pre_;   // hidden pre-activations
  JetBatch output_;
  mutable Eigen::MatrixXd a_bar_, z_bar_;
};

/// tanh on every jet in the batch.
JetBatch tanh_jet_forward(const JetBatch& z);

/// Adjoint of tanh_jet_forward: returns z_bar given z and y_bar.
Eigen::MatrixXd tanh_jet_backward(const JetBatch& z, const Eigen::MatrixXd& y_bar);

}  // namespace rtnn
