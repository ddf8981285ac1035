#pragma once

// Dense layer primitives with explicit backward passes. Activations are
// row-per-token matrices; a batch of windows is stacked row-wise.

#include "hagi/common.hpp"

#include <cmath>
#include <vector>

namespace hagi::nn {

/// y = x W + b with W (in x out) and b (1 x out).
template <typename Scalar>
struct Linear {
  Matrix<Scalar> weight;
  Matrix<Scalar> bias;

  Eigen::Index in() const { return weight.rows(); }
  Eigen::Index out() const { return weight.cols(); }
  bool empty() const { return weight.size() == 0; }
};

/// Single-hidden-layer perceptron: out(gelu(hidden(x))).
template <typename Scalar>
struct Perceptron {
  Linear<Scalar> hidden;
  Linear<Scalar> out;
  bool empty() const { return hidden.empty(); }
};

template <typename Scalar>
struct LayerNorm {
  Matrix<Scalar> gamma;  // 1 x width
  Matrix<Scalar> beta;
};

template <typename Scalar>
Matrix<Scalar> linear(const Matrix<Scalar>& x, const Linear<Scalar>& l) {
  Matrix<Scalar> y(x.rows(), l.out());
  y.noalias() = x * l.weight;
  y.rowwise() += l.bias.row(0);
  return y;
}

/// Accumulates parameter gradients into `g`; returns dL/dx.
template <typename Scalar>
Matrix<Scalar> linear_backward(const Matrix<Scalar>& x, const Linear<Scalar>& l, const Matrix<Scalar>& dy,
                               Linear<Scalar>& g) {
  g.weight.noalias() += x.transpose() * dy;
  g.bias += dy.colwise().sum();
  Matrix<Scalar> dx(dy.rows(), l.in());
  dx.noalias() = dy * l.weight.transpose();
  return dx;
}

// GELU, tanh form: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
inline constexpr double kGeluC = 0.7978845608028654;
inline constexpr double kGeluA = 0.044715;

template <typename Scalar>
Matrix<Scalar> gelu(const Matrix<Scalar>& x) {
  const auto a = x.array();
  return (Scalar(0.5) * a * (Scalar(1) + (Scalar(kGeluC) * (a + Scalar(kGeluA) * a.cube())).tanh())).matrix();
}

template <typename Scalar>
Matrix<Scalar> gelu_backward(const Matrix<Scalar>& x, const Matrix<Scalar>& dy) {
  const auto a = x.array();
  const auto th = (Scalar(kGeluC) * (a + Scalar(kGeluA) * a.cube())).tanh().eval();
  const auto dudx = Scalar(kGeluC) * (Scalar(1) + Scalar(3 * kGeluA) * a.square());
  return (dy.array() * (Scalar(0.5) * (Scalar(1) + th) + Scalar(0.5) * a * (Scalar(1) - th.square()) * dudx))
      .matrix();
}

template <typename Scalar>
struct PerceptronCache {
  Matrix<Scalar> input;
  Matrix<Scalar> pre;     // hidden pre-activation
  Matrix<Scalar> hidden;  // gelu(pre)
};

template <typename Scalar>
Matrix<Scalar> perceptron(const Matrix<Scalar>& x, const Perceptron<Scalar>& p, PerceptronCache<Scalar>* cache) {
  Matrix<Scalar> pre = linear(x, p.hidden);
  Matrix<Scalar> h = gelu(pre);
  Matrix<Scalar> y = linear(h, p.out);
  if (cache) {
    cache->input = x;
    cache->pre = std::move(pre);
    cache->hidden = std::move(h);
  }
  return y;
}

template <typename Scalar>
Matrix<Scalar> perceptron_backward(const PerceptronCache<Scalar>& c, const Perceptron<Scalar>& p,
                                   const Matrix<Scalar>& dy, Perceptron<Scalar>& g) {
  const Matrix<Scalar> dh = linear_backward(c.hidden, p.out, dy, g.out);
  const Matrix<Scalar> dpre = gelu_backward(c.pre, dh);
  return linear_backward(c.input, p.hidden, dpre, g.hidden);
}

inline constexpr double kLayerNormEps = 1e-5;

template <typename Scalar>
struct LayerNormCache {
  Matrix<Scalar> normalized;  // (x - mean) * rstd
  Vector<Scalar> rstd;
};

/// Row-wise layer normalization.
template <typename Scalar>
Matrix<Scalar> layer_norm(const Matrix<Scalar>& x, const LayerNorm<Scalar>& p, LayerNormCache<Scalar>* cache) {
  const Scalar inv_w = Scalar(1) / Scalar(x.cols());
  Vector<Scalar> mean = x.rowwise().sum() * inv_w;
  Matrix<Scalar> centered = x.colwise() - mean;
  Vector<Scalar> rstd =
      ((centered.array().square().rowwise().sum() * inv_w) + Scalar(kLayerNormEps)).rsqrt().matrix();
  Matrix<Scalar> normalized = centered.array().colwise() * rstd.array();
  Matrix<Scalar> y = normalized.array().rowwise() * p.gamma.row(0).array();
  y.rowwise() += p.beta.row(0);
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->rstd = std::move(rstd);
  }
  return y;
}

template <typename Scalar>
Matrix<Scalar> layer_norm_backward(const LayerNormCache<Scalar>& c, const LayerNorm<Scalar>& p,
                                   const Matrix<Scalar>& dy, LayerNorm<Scalar>& g) {
  g.gamma += (dy.array() * c.normalized.array()).colwise().sum().matrix();
  g.beta += dy.colwise().sum();
  const Scalar inv_w = Scalar(1) / Scalar(dy.cols());
  Matrix<Scalar> dn = dy.array().rowwise() * p.gamma.row(0).array();
  const Vector<Scalar> mean_dn = dn.rowwise().sum() * inv_w;
  const Vector<Scalar> mean_dn_n = (dn.array() * c.normalized.array()).rowwise().sum().matrix() * inv_w;
  dn.colwise() -= mean_dn;
  dn -= (c.normalized.array().colwise() * mean_dn_n.array()).matrix();
  return dn.array().colwise() * c.rstd.array();
}

/// Multi-head scaled dot-product attention for `windows` stacked sequences of
/// `length` tokens each (queries and keys share the length). Heads split the
/// feature dimension; each head uses scale 1/sqrt(head width).
template <typename Scalar>
Matrix<Scalar> attention(const Matrix<Scalar>& q, const Matrix<Scalar>& k, const Matrix<Scalar>& v, int windows,
                         int length, int heads, std::vector<Matrix<Scalar>>* probs) {
  const Eigen::Index width = q.cols();
  const Eigen::Index dh = width / heads;
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(dh));
  Matrix<Scalar> out(q.rows(), width);
  if (probs) probs->resize(static_cast<std::size_t>(windows * heads));
  Matrix<Scalar> scores(length, length);
  for (int w = 0; w < windows; ++w) {
    const Eigen::Index r0 = Eigen::Index(w) * length;
    for (int h = 0; h < heads; ++h) {
      const Eigen::Index c0 = Eigen::Index(h) * dh;
      scores.noalias() = q.block(r0, c0, length, dh) * k.block(r0, c0, length, dh).transpose();
      scores *= scale;
      const Vector<Scalar> row_max = scores.rowwise().maxCoeff();
      scores = (scores.colwise() - row_max).array().exp().matrix();
      const Vector<Scalar> row_sum = scores.rowwise().sum();
      scores = scores.array().colwise() / row_sum.array();
      out.block(r0, c0, length, dh).noalias() = scores * v.block(r0, c0, length, dh);
      if (probs) (*probs)[static_cast<std::size_t>(w * heads + h)] = scores;
    }
  }
  return out;
}

template <typename Scalar>
void attention_backward(const Matrix<Scalar>& q, const Matrix<Scalar>& k, const Matrix<Scalar>& v,
                        const std::vector<Matrix<Scalar>>& probs, const Matrix<Scalar>& dout, int windows, int length,
                        int heads, Matrix<Scalar>& dq, Matrix<Scalar>& dk, Matrix<Scalar>& dv) {
  const Eigen::Index width = q.cols();
  const Eigen::Index dh = width / heads;
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(dh));
  dq.resize(q.rows(), width);
  dk.resize(k.rows(), width);
  dv.resize(v.rows(), width);
  Matrix<Scalar> dp(length, length);
  for (int w = 0; w < windows; ++w) {
    const Eigen::Index r0 = Eigen::Index(w) * length;
    for (int h = 0; h < heads; ++h) {
      const Eigen::Index c0 = Eigen::Index(h) * dh;
      const Matrix<Scalar>& p = probs[static_cast<std::size_t>(w * heads + h)];
      const auto d_o = dout.block(r0, c0, length, dh);
      dv.block(r0, c0, length, dh).noalias() = p.transpose() * d_o;
      dp.noalias() = d_o * v.block(r0, c0, length, dh).transpose();
      const Vector<Scalar> row_dot = (dp.array() * p.array()).rowwise().sum().matrix();
      dp = (p.array() * (dp.colwise() - row_dot).array()).matrix() * scale;
      dq.block(r0, c0, length, dh).noalias() = dp * k.block(r0, c0, length, dh);
      dk.block(r0, c0, length, dh).noalias() = dp.transpose() * q.block(r0, c0, length, dh);
    }
  }
}

/// Standard transformer sinusoidal table: row = position, even columns sin, odd cos.
template <typename Scalar>
Matrix<Scalar> sinusoidal_table(int positions, int width) {
  Matrix<Scalar> pe(positions, width);
  for (int pos = 0; pos < positions; ++pos) {
    for (int i = 0; i < width; i += 2) {
      const double angle = pos / std::pow(10000.0, static_cast<double>(i) / width);
      pe(pos, i) = static_cast<Scalar>(std::sin(angle));
      if (i + 1 < width) pe(pos, i + 1) = static_cast<Scalar>(std::cos(angle));
    }
  }
  return pe;
}

/// Sinusoidal embedding of integer diffusion steps, one row per step value.
template <typename Scalar>
Matrix<Scalar> step_embedding(const std::vector<int>& steps, int width) {
  Matrix<Scalar> out(static_cast<Eigen::Index>(steps.size()), width);
  const int half = width / 2;
  for (std::size_t r = 0; r < steps.size(); ++r) {
    for (int i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * i / std::max(half, 1));
      out(static_cast<Eigen::Index>(r), i) = static_cast<Scalar>(std::sin(steps[r] * freq));
      out(static_cast<Eigen::Index>(r), half + i) = static_cast<Scalar>(std::cos(steps[r] * freq));
    }
    if (width % 2) out(static_cast<Eigen::Index>(r), width - 1) = Scalar(0);
  }
  return out;
}

}  // namespace hagi::nn
