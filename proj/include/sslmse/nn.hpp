// Copyright 2026  The sslmse Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SSLMSE_NN_HPP_
#define SSLMSE_NN_HPP_

// Forward/backward primitives shared by the enhancement model and the frozen
// feature encoder. Activations are channels x frames matrices; parameters are
// matrices too (biases and gains are C x 1) so every model exposes a uniform
// list of named tensors.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "sslmse/common.hpp"

namespace sslmse::nn {

using Index = Eigen::Index;

/// Column j holds x[j*hop, j*hop + window).
inline Matrix frame_signal(const Vector &x, int window, int hop, Index frames) {
  Matrix out(window, frames);
  for (Index j = 0; j < frames; ++j) out.col(j) = x.segment(j * hop, window);
  return out;
}

/// Adjoint of frame_signal: each column is added back at offset j*hop.
inline Vector overlap_add(const Matrix &frames, int hop, Index length) {
  Vector out = Vector::Zero(length);
  const Index window = frames.rows();
  for (Index j = 0; j < frames.cols(); ++j) out.segment(j * hop, window) += frames.col(j);
  return out;
}

/// Y = W X + b 1^T.
inline Matrix affine(const Matrix &w, const Matrix &b, const Matrix &x) {
  Matrix y = w * x;
  y.colwise() += b.col(0);
  return y;
}

inline void affine_backward(const Matrix &w, const Matrix &x, const Matrix &dy,
                            Matrix *dx, Matrix *dw, Matrix *db) {
  if (dw) dw->noalias() += dy * x.transpose();
  if (db) db->col(0) += dy.rowwise().sum();
  if (dx) dx->noalias() = w.transpose() * dy;
}

/// Per-channel dilated convolution with zero "same" padding; kernel width is
/// odd and taps are centred on the output frame.
inline Matrix depthwise_conv(const Matrix &x, const Matrix &w, const Matrix &b,
                             int dilation) {
  const Index channels = x.rows(), frames = x.cols();
  const int taps = static_cast<int>(w.cols());
  const int half = (taps - 1) / 2;
  Matrix y(channels, frames);
  y.colwise() = b.col(0);
  for (int k = 0; k < taps; ++k) {
    const Index shift = static_cast<Index>(k - half) * dilation;
    const Index lo = std::max<Index>(0, -shift);
    const Index hi = std::min<Index>(frames, frames - shift);
    if (hi <= lo) continue;
    y.middleCols(lo, hi - lo) +=
        w.col(k).asDiagonal() * x.middleCols(lo + shift, hi - lo);
  }
  return y;
}

inline void depthwise_conv_backward(const Matrix &x, const Matrix &w, int dilation,
                                    const Matrix &dy, Matrix *dx, Matrix *dw,
                                    Matrix *db) {
  const Index frames = x.cols();
  const int taps = static_cast<int>(w.cols());
  const int half = (taps - 1) / 2;
  if (dx) dx->setZero(x.rows(), frames);
  if (db) db->col(0) += dy.rowwise().sum();
  for (int k = 0; k < taps; ++k) {
    const Index shift = static_cast<Index>(k - half) * dilation;
    const Index lo = std::max<Index>(0, -shift);
    const Index hi = std::min<Index>(frames, frames - shift);
    if (hi <= lo) continue;
    const auto g = dy.middleCols(lo, hi - lo);
    const auto src = x.middleCols(lo + shift, hi - lo);
    if (dw) dw->col(k) += g.cwiseProduct(src).rowwise().sum();
    if (dx) dx->middleCols(lo + shift, hi - lo) += w.col(k).asDiagonal() * g;
  }
}

inline constexpr Real kNormEps = 1e-8;

/// Normalization over the whole C x T block, then per-channel affine.
struct GlobalNorm {
  Matrix xhat;
  Real inv_std = 0.0;

  Matrix forward(const Matrix &x, const Matrix &gamma, const Matrix &beta) {
    const Real n = static_cast<Real>(x.size());
    const Real mean = x.sum() / n;
    xhat = x.array() - mean;
    const Real var = xhat.squaredNorm() / n;
    inv_std = 1.0 / std::sqrt(var + kNormEps);
    xhat *= inv_std;
    Matrix y = gamma.col(0).asDiagonal() * xhat;
    y.colwise() += beta.col(0);
    return y;
  }

  Matrix backward(const Matrix &gamma, const Matrix &dy, Matrix *dgamma,
                  Matrix *dbeta) const {
    if (dgamma) dgamma->col(0) += dy.cwiseProduct(xhat).rowwise().sum();
    if (dbeta) dbeta->col(0) += dy.rowwise().sum();
    const Matrix g = gamma.col(0).asDiagonal() * dy;
    const Real n = static_cast<Real>(g.size());
    const Real mean_g = g.sum() / n;
    const Real mean_gx = g.cwiseProduct(xhat).sum() / n;
    return inv_std * (g.array() - mean_g - xhat.array() * mean_gx).matrix();
  }
};

/// Normalization across channels independently for every frame, then
/// per-channel affine.
struct FrameNorm {
  Matrix xhat;
  RowVector inv_std;

  Matrix forward(const Matrix &x, const Matrix &gamma, const Matrix &beta) {
    const Real c = static_cast<Real>(x.rows());
    const RowVector mean = x.colwise().sum() / c;
    xhat = x.rowwise() - mean;
    const RowVector var = xhat.colwise().squaredNorm() / c;
    inv_std = (var.array() + kNormEps).rsqrt().matrix();
    xhat = xhat * inv_std.asDiagonal();
    Matrix y = gamma.col(0).asDiagonal() * xhat;
    y.colwise() += beta.col(0);
    return y;
  }

  Matrix backward(const Matrix &gamma, const Matrix &dy) const {
    const Matrix g = gamma.col(0).asDiagonal() * dy;
    const Real c = static_cast<Real>(g.rows());
    const RowVector mean_g = g.colwise().sum() / c;
    const RowVector mean_gx = g.cwiseProduct(xhat).colwise().sum() / c;
    Matrix dx = g.rowwise() - mean_g;
    dx -= xhat * mean_gx.asDiagonal();
    return dx * inv_std.asDiagonal();
  }
};

/// x * Phi(x). Smooth, and gelu(x) - gelu(-x) == x.
inline Matrix gelu(const Matrix &x) {
  return x.unaryExpr([](Real v) { return 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2)); });
}

inline Matrix gelu_backward(const Matrix &x, const Matrix &dy) {
  const Real inv_sqrt_2pi = 0.5 * M_2_SQRTPI * M_SQRT1_2;
  return dy.cwiseProduct(x.unaryExpr([inv_sqrt_2pi](Real v) {
    return 0.5 * (1.0 + std::erf(v * M_SQRT1_2)) + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
  }));
}

inline Matrix sigmoid(const Matrix &x) {
  return x.unaryExpr([](Real v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const Real e = std::exp(v);
    return e / (1.0 + e);
  });
}

/// Gradient through sigmoid given its output s.
inline Matrix sigmoid_backward(const Matrix &s, const Matrix &dy) {
  return dy.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix()));
}

// ---------------------------------------------------------------------------
// Parameter-set utilities. A parameter set is any type with
// for_each(f) calling f(name, Matrix&) for every tensor in a fixed order.

template <class P>
P zeros_like(const P &params) {
  P out = params;
  out.for_each([](const std::string &, Matrix &m) { m.setZero(); });
  return out;
}

template <class P>
std::vector<Matrix *> tensor_list(P &params) {
  std::vector<Matrix *> out;
  params.for_each([&](const std::string &, Matrix &m) { out.push_back(&m); });
  return out;
}

template <class P>
std::vector<const Matrix *> tensor_list(const P &params) {
  std::vector<const Matrix *> out;
  params.for_each([&](const std::string &, const Matrix &m) { out.push_back(&m); });
  return out;
}

template <class P>
Index parameter_count(const P &params) {
  Index n = 0;
  params.for_each([&](const std::string &, const Matrix &m) { n += m.size(); });
  return n;
}

/// dst += scale * src, tensor by tensor.
template <class P>
void accumulate(P &dst, const P &src, Real scale = 1.0) {
  auto d = tensor_list(dst);
  auto s = tensor_list(src);
  for (std::size_t i = 0; i < d.size(); ++i) *d[i] += scale * *s[i];
}

template <class P>
Real global_norm(const P &params) {
  Real sq = 0.0;
  params.for_each([&](const std::string &, const Matrix &m) { sq += m.squaredNorm(); });
  return std::sqrt(sq);
}

template <class P>
bool all_finite(const P &params) {
  bool ok = true;
  params.for_each([&](const std::string &, const Matrix &m) { ok = ok && m.allFinite(); });
  return ok;
}

/// Values rounded through float, i.e. exactly what a checkpoint stores.
inline Matrix round_to_float(const Matrix &m) {
  return m.unaryExpr([](Real v) { return static_cast<Real>(static_cast<float>(v)); });
}

template <class P>
P round_to_float(const P &params) {
  P out = params;
  out.for_each([](const std::string &, Matrix &m) { m = round_to_float(m); });
  return out;
}

/// Gaussian init with std = gain / sqrt(fan_in), values representable in f32.
inline Matrix random_matrix(Index rows, Index cols, Real stddev, std::mt19937_64 &rng) {
  std::normal_distribution<Real> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i)
      m(i, j) = static_cast<Real>(static_cast<float>(dist(rng)));
  return m;
}

/// First-order adaptive-moment optimizer.
class Adam {
 public:
  struct Options {
    Real beta1 = 0.9;
    Real beta2 = 0.999;
    Real eps = 1e-8;
  };

  Adam() = default;
  explicit Adam(Options opt) : opt_(opt) {}

  template <class P>
  void step(P &params, const P &grads, Real lr) {
    auto p = tensor_list(params);
    auto g = tensor_list(grads);
    if (m_.empty()) {
      for (auto *t : p) {
        m_.push_back(Matrix::Zero(t->rows(), t->cols()));
        v_.push_back(Matrix::Zero(t->rows(), t->cols()));
      }
    }
    ++t_;
    const Real c1 = 1.0 - std::pow(opt_.beta1, static_cast<Real>(t_));
    const Real c2 = 1.0 - std::pow(opt_.beta2, static_cast<Real>(t_));
    for (std::size_t i = 0; i < p.size(); ++i) {
      m_[i] = opt_.beta1 * m_[i] + (1.0 - opt_.beta1) * *g[i];
      v_[i] = opt_.beta2 * v_[i] + (1.0 - opt_.beta2) * g[i]->cwiseProduct(*g[i]);
      const Real eps = opt_.eps;
      p[i]->array() -= lr * (m_[i].array() / c1) /
                       ((v_[i].array() / c2).sqrt() + eps);
    }
  }

  long steps() const { return t_; }

 private:
  Options opt_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

}  // namespace sslmse::nn

#endif  // SSLMSE_NN_HPP_
