#include "rtnn/jet_batch.hpp"

#include <algorithm>
#include <cmath>

namespace rtnn {

namespace {

constexpr Eigen::Index kTile = 32;
constexpr Eigen::Index kGemmBlock = 512;

/// Component pointers of one tile of a component-major batch.
struct TileView {
  const double* base;
  Eigen::Index stride;
  const double* operator[](int k) const { return base + k * stride; }
};

struct MutTileView {
  double* base;
  Eigen::Index stride;
  double* operator[](int k) const { return base + k * stride; }
};

void tanh_forward_tile(int n, int ord, TileView z, MutTileView y, Eigen::Index len) {
  double f1[kTile], f2[kTile], f3[kTile];
  double* t = y[0];
  for (Eigen::Index e = 0; e < len; ++e) t[e] = std::tanh(z[0][e]);
  for (Eigen::Index e = 0; e < len; ++e) {
    f1[e] = 1.0 - t[e] * t[e];
    f2[e] = -2.0 * t[e] * f1[e];
    f3[e] = -2.0 * f1[e] * f1[e] - 2.0 * t[e] * f2[e];
  }
  if (ord < 1) return;
  for (int i = 0; i < n; ++i) {
    const double* zi = z[1 + i];
    double* yi = y[1 + i];
    for (Eigen::Index e = 0; e < len; ++e) yi[e] = f1[e] * zi[e];
  }
  if (ord < 2) return;
  const int h0 = 1 + n;
  for (int q = 0; q < jet_hess_size(n); ++q) {
    const double* zh = z[h0 + q];
    const double* zi = z[1 + kJetLayout.pairs[q][0]];
    const double* zj = z[1 + kJetLayout.pairs[q][1]];
    double* yh = y[h0 + q];
    for (Eigen::Index e = 0; e < len; ++e) yh[e] = f1[e] * zh[e] + f2[e] * zi[e] * zj[e];
  }
  if (ord < 3) return;
  const int t0 = h0 + jet_hess_size(n);
  for (int q = 0; q < jet_third_size(n); ++q) {
    const auto [i, j, k] = kJetLayout.triples[q];
    const double* zt = z[t0 + q];
    const double *zi = z[1 + i], *zj = z[1 + j], *zk = z[1 + k];
    const double* hjk = z[h0 + kJetLayout.pair_index[j][k]];
    const double* hik = z[h0 + kJetLayout.pair_index[i][k]];
    const double* hij = z[h0 + kJetLayout.pair_index[i][j]];
    double* yt = y[t0 + q];
    for (Eigen::Index e = 0; e < len; ++e)
      yt[e] = f1[e] * zt[e] + f2[e] * (zi[e] * hjk[e] + zj[e] * hik[e] + zk[e] * hij[e]) +
              f3[e] * zi[e] * zj[e] * zk[e];
  }
}

/// t holds tanh of the value component.
void tanh_backward_tile(int n, int ord, int comps, TileView z, const double* t, TileView yb, MutTileView zb,
                        Eigen::Index len) {
  double f1[kTile], f2[kTile], f3[kTile], f4[kTile];
  for (Eigen::Index e = 0; e < len; ++e) {
    f1[e] = 1.0 - t[e] * t[e];
    f2[e] = -2.0 * t[e] * f1[e];
    f3[e] = -2.0 * f1[e] * f1[e] - 2.0 * t[e] * f2[e];
    f4[e] = -6.0 * f1[e] * f2[e] - 2.0 * t[e] * f3[e];
  }
  for (int k = 0; k < comps; ++k) {
    const double* y = yb[k];
    double* o = zb[k];
    for (Eigen::Index e = 0; e < len; ++e) o[e] = f1[e] * y[e];
  }
  double* b0 = zb[0];
  if (ord >= 1)
    for (int i = 0; i < n; ++i) {
      const double *zi = z[1 + i], *y = yb[1 + i];
      for (Eigen::Index e = 0; e < len; ++e) b0[e] += f2[e] * zi[e] * y[e];
    }
  const int h0 = 1 + n;
  if (ord >= 2)
    for (int q = 0; q < jet_hess_size(n); ++q) {
      const int i = kJetLayout.pairs[q][0], j = kJetLayout.pairs[q][1];
      const double *zh = z[h0 + q], *zi = z[1 + i], *zj = z[1 + j], *y = yb[h0 + q];
      double *bi = zb[1 + i], *bj = zb[1 + j];
      for (Eigen::Index e = 0; e < len; ++e) {
        b0[e] += (f2[e] * zh[e] + f3[e] * zi[e] * zj[e]) * y[e];
        bi[e] += f2[e] * zj[e] * y[e];
      }
      for (Eigen::Index e = 0; e < len; ++e) bj[e] += f2[e] * zi[e] * y[e];
    }
  if (ord >= 3) {
    const int t0 = h0 + jet_hess_size(n);
    for (int q = 0; q < jet_third_size(n); ++q) {
      const auto [i, j, k] = kJetLayout.triples[q];
      const int pjk = h0 + kJetLayout.pair_index[j][k], pik = h0 + kJetLayout.pair_index[i][k],
                pij = h0 + kJetLayout.pair_index[i][j];
      const double *zt = z[t0 + q], *zi = z[1 + i], *zj = z[1 + j], *zk = z[1 + k];
      const double *hjk = z[pjk], *hik = z[pik], *hij = z[pij], *y = yb[t0 + q];
      for (Eigen::Index e = 0; e < len; ++e)
        b0[e] += (f2[e] * zt[e] + f3[e] * (zi[e] * hjk[e] + zj[e] * hik[e] + zk[e] * hij[e]) +
                  f4[e] * zi[e] * zj[e] * zk[e]) *
                 y[e];
      double *bi = zb[1 + i], *bj = zb[1 + j], *bk = zb[1 + k];
      for (Eigen::Index e = 0; e < len; ++e) bi[e] += (f2[e] * hjk[e] + f3[e] * zj[e] * zk[e]) * y[e];
      for (Eigen::Index e = 0; e < len; ++e) bj[e] += (f2[e] * hik[e] + f3[e] * zi[e] * zk[e]) * y[e];
      for (Eigen::Index e = 0; e < len; ++e) bk[e] += (f2[e] * hij[e] + f3[e] * zi[e] * zj[e]) * y[e];
      double *cjk = zb[pjk], *cik = zb[pik], *cij = zb[pij];
      for (Eigen::Index e = 0; e < len; ++e) cjk[e] += f2[e] * zi[e] * y[e];
      for (Eigen::Index e = 0; e < len; ++e) cik[e] += f2[e] * zj[e] * y[e];
      for (Eigen::Index e = 0; e < len; ++e) cij[e] += f2[e] * zk[e] * y[e];
    }
  }
}

void tanh_backward_impl(const JetBatch& z, const double* t, const Eigen::MatrixXd& y_bar, Eigen::MatrixXd& z_bar) {
  const Eigen::Index block = static_cast<Eigen::Index>(z.width()) * z.points();
  z_bar.resize(y_bar.rows(), y_bar.cols());
  for (Eigen::Index e0 = 0; e0 < block; e0 += kTile) {
    const Eigen::Index len = std::min(kTile, block - e0);
    tanh_backward_tile(z.nvars(), z.order(), z.components(), {z.data().data() + e0, block}, t + e0,
                       {y_bar.data() + e0, block}, {z_bar.data() + e0, block}, len);
  }
}


void tanh_forward_into(const JetBatch& z, JetBatch& y) {
  y.reshape(z.width(), z.points(), z.nvars(), z.order());
  const Eigen::Index block = static_cast<Eigen::Index>(z.width()) * z.points();
  for (Eigen::Index e0 = 0; e0 < block; e0 += kTile)
    tanh_forward_tile(z.nvars(), z.order(), {z.data().data() + e0, block}, {y.data().data() + e0, block},
                      std::min(kTile, block - e0));
}

}  // namespace

JetBatch tanh_jet_forward(const JetBatch& z) {
  JetBatch y;
  tanh_forward_into(z, y);
  return y;
}

Eigen::MatrixXd tanh_jet_backward(const JetBatch& z, const Eigen::MatrixXd& y_bar) {
  const Eigen::MatrixXd t = z.component(0).array().tanh().matrix();
  Eigen::MatrixXd z_bar;
  tanh_backward_impl(z, t.data(), y_bar, z_bar);
  return z_bar;
}

void NetworkJetPass::forward(const CoefficientNetwork& net, const Eigen::MatrixXd& points, int order) {
  const int n = net.input_width();
  if (points.rows() != n) throw Error(ErrorCode::ShapeMismatch, "point batch rows must equal the network input width");
  if (n > kMaxJetVars) throw Error(ErrorCode::InvalidDimension, "batched jets support at most 4 inputs");
  const int P = static_cast<int>(points.cols());
  const int L = net.layer_count();
  acts_.resize(static_cast<std::size_t>(L));
  pre_.resize(static_cast<std::size_t>(L - 1));

  x0_ = ((points.colwise() - net.input_offset()).array().colwise() * net.input_scale().array()).matrix();

  for (int l = 0; l < L; ++l) {
    const auto W = net.weight(l);
    const auto lu = static_cast<std::size_t>(l);
    JetBatch& z = l + 1 < L ? pre_[lu] : output_;
    z.reshape(static_cast<int>(W.rows()), P, n, order);
    if (l == 0) {
      // Input jets are affine: constant gradients and no higher terms.
      z.component(0).noalias() = W * x0_;
      for (int i = 0; i < n && order >= 1; ++i) {
        const Eigen::VectorXd wi = W.col(i) * net.input_scale()(i);
        auto zi = z.component(z.grad_index(i));
        for (Eigen::Index p = 0; p < P; ++p) zi.col(p) = wi;
      }
      z.data().rightCols(z.data().cols() - static_cast<Eigen::Index>(order >= 1 ? 1 + n : 1) * P).setZero();
    } else {
      z.data().noalias() = W * acts_[lu].data();
    }
    z.component(0).colwise() += net.bias(l);
    if (l + 1 < L) tanh_forward_into(z, acts_[lu + 1]);
  }
}

void NetworkJetPass::backward(const CoefficientNetwork& net, const Eigen::MatrixXd& output_adjoint,
                              Eigen::Ref<Eigen::VectorXd> gradient) const {
  if (gradient.size() != net.parameter_count()) throw Error(ErrorCode::ShapeMismatch, "gradient length");
  if (output_adjoint.rows() != output_.data().rows() || output_adjoint.cols() != output_.data().cols())
    throw Error(ErrorCode::ShapeMismatch, "output adjoint shape");
  const Eigen::Index P = output_.points();
  const Eigen::MatrixXd* z_bar = &output_adjoint;
  for (int l = net.layer_count() - 1; l >= 0; --l) {
    const auto W = net.weight(l);
    const auto lu = static_cast<std::size_t>(l);
    Eigen::Map<Eigen::MatrixXd> gW(gradient.data() + net.weight_offset(l), W.rows(), W.cols());
    Eigen::Map<Eigen::VectorXd> gb(gradient.data() + net.weight_offset(l) + W.size(), W.rows());
    gb += z_bar->leftCols(P).rowwise().sum();
    if (l == 0) {
      gW.noalias() += z_bar->leftCols(P) * x0_.transpose();
      for (int i = 0; i < output_.nvars() && output_.order() >= 1; ++i)
        gW.col(i) += net.input_scale()(i) * z_bar->middleCols((1 + i) * P, P).rowwise().sum();
      break;
    }
    const Eigen::MatrixXd& a = acts_[lu].data();
    for (Eigen::Index c = 0; c < a.cols(); c += kGemmBlock) {
      const Eigen::Index w = std::min(kGemmBlock, a.cols() - c);
      gW.noalias() += z_bar->middleCols(c, w) * a.middleCols(c, w).transpose();
    }
    a_bar_.noalias() = W.transpose() * *z_bar;
    tanh_backward_impl(pre_[lu - 1], a.data(), a_bar_, z_bar_);
    z_bar = &z_bar_;
  }
}

}  // namespace rtnn
