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

#ifndef SSLMSE_SEMODEL_HPP_
#define SSLMSE_SEMODEL_HPP_

// Mask-based time-domain enhancement network (reduced ConvTasNet).
//
//   frames  : window L, stride L/2, S = L/2 zeros in front and >= S behind
//   encoder : E = gelu(U frames)                          N_b x T_f
//   separator: gLN -> 1x1 (N_b->B) -> R*X dilated TCN blocks -> gelu
//              -> 1x1 (B->N_b) -> sigmoid mask M
//   decoder : overlap-add(V (M .* E)), trimmed back to the input length
//
// TCN block: 1x1 (B->H), gelu, gLN, depthwise conv (P taps, dilation 2^x),
// gelu, gLN, 1x1 (H->B), residual add.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sslmse/nn.hpp"
#include "sslmse/signal.hpp"

namespace sslmse {

struct SEConfig {
  int basis = 128;      // N_b
  int window = 32;      // L
  int bottleneck = 32;  // B
  int repeats = 2;      // R
  int blocks = 4;       // X, blocks per repeat
  int hidden = 64;      // H
  int kernel = 3;       // P

  /// Sizes of the full-scale front-end.
  static SEConfig full_scale() { return {4096, 320, 256, 4, 8, 512, 3}; }

  int stride() const { return window / 2; }

  void validate() const {
    if (basis < 1 || window < 1 || bottleneck < 1 || repeats < 1 || blocks < 1 ||
        hidden < 1 || kernel < 1)
      throw ConfigError("se: all dimensions must be >= 1");
    if (window % 2 != 0) throw ConfigError("se: window must be even");
    if (kernel % 2 != 1) throw ConfigError("se: kernel must be odd");
  }
  bool operator==(const SEConfig &) const = default;
};

struct TcnBlock {
  Matrix in_weight, in_bias;         // H x B, H x 1
  Matrix norm1_gain, norm1_bias;     // H x 1
  Matrix dw_weight, dw_bias;         // H x P, H x 1
  Matrix norm2_gain, norm2_bias;     // H x 1
  Matrix out_weight, out_bias;       // B x H, B x 1
};

struct SEParams {
  SEConfig config;
  Matrix enc_basis;                  // N_b x L
  Matrix in_norm_gain, in_norm_bias; // N_b x 1
  Matrix bottleneck_weight, bottleneck_bias;  // B x N_b, B x 1
  std::vector<TcnBlock> blocks;      // R*X
  Matrix mask_weight, mask_bias;     // N_b x B, N_b x 1
  Matrix dec_basis;                  // L x N_b

  template <class F>
  void for_each(F &&f) { visit(*this, f); }
  template <class F>
  void for_each(F &&f) const { visit(*this, f); }

 private:
  template <class Self, class F>
  static void visit(Self &s, F &f) {
    f(std::string("encoder.basis"), s.enc_basis);
    f(std::string("separator.norm.gain"), s.in_norm_gain);
    f(std::string("separator.norm.bias"), s.in_norm_bias);
    f(std::string("separator.bottleneck.weight"), s.bottleneck_weight);
    f(std::string("separator.bottleneck.bias"), s.bottleneck_bias);
    for (std::size_t i = 0; i < s.blocks.size(); ++i) {
      const std::string p = "separator.tcn" + std::to_string(i) + ".";
      auto &b = s.blocks[i];
      f(p + "in.weight", b.in_weight);
      f(p + "in.bias", b.in_bias);
      f(p + "norm1.gain", b.norm1_gain);
      f(p + "norm1.bias", b.norm1_bias);
      f(p + "dw.weight", b.dw_weight);
      f(p + "dw.bias", b.dw_bias);
      f(p + "norm2.gain", b.norm2_gain);
      f(p + "norm2.bias", b.norm2_bias);
      f(p + "out.weight", b.out_weight);
      f(p + "out.bias", b.out_bias);
    }
    f(std::string("separator.mask.weight"), s.mask_weight);
    f(std::string("separator.mask.bias"), s.mask_bias);
    f(std::string("decoder.basis"), s.dec_basis);
  }
};

inline constexpr Real kInitMaskBias = 3.0;
inline constexpr Real kMaskWeightScale = 0.1;

/// Sine analysis/synthesis window of length L; its square sums to one under
/// hop L/2.
inline Vector sine_window(int length) {
  Vector w(length);
  for (int n = 0; n < length; ++n) w(n) = std::sin(M_PI * (n + 0.5) / length);
  return w;
}

/// Sets U = [A; -A] diag(w) and V = diag(w) [A^T, -A^T] for A (N_b/2 x L)
/// with orthonormal columns. Since gelu(u) - gelu(-u) = u, a unit mask then
/// reconstructs the input exactly.
inline void set_tight_frame_basis(SEParams &p, const Matrix &a) {
  const int nb = p.config.basis, l = p.config.window;
  if (a.rows() * 2 != nb || a.cols() != l) throw ShapeError("set_tight_frame_basis: basis shape mismatch");
  const Vector w = sine_window(l);
  Matrix u(nb, l);
  u.topRows(nb / 2) = a * w.asDiagonal();
  u.bottomRows(nb / 2) = -u.topRows(nb / 2);
  p.enc_basis = nn::round_to_float(u);
  Matrix v(l, nb);
  v.leftCols(nb / 2) = w.asDiagonal() * a.transpose();
  v.rightCols(nb / 2) = -v.leftCols(nb / 2);
  p.dec_basis = nn::round_to_float(v);
}

inline SEParams init_se_model(const SEConfig &config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(derive_seed(seed, 0x7365));
  const int nb = config.basis, b = config.bottleneck, h = config.hidden;
  auto fan = [](int n) { return 1.0 / std::sqrt(static_cast<Real>(n)); };
  SEParams p;
  p.config = config;
  p.enc_basis = nn::random_matrix(nb, config.window, fan(config.window), rng);
  p.dec_basis = nn::random_matrix(config.window, nb, fan(nb), rng);
  if (nb % 2 == 0 && nb / 2 >= config.window) {
    const Matrix a = Eigen::HouseholderQR<Matrix>(nn::random_matrix(nb / 2, config.window, 1.0, rng))
                         .householderQ() * Matrix::Identity(nb / 2, config.window);
    set_tight_frame_basis(p, a);
  }
  p.in_norm_gain = Matrix::Ones(nb, 1);
  p.in_norm_bias = Matrix::Zero(nb, 1);
  p.bottleneck_weight = nn::random_matrix(b, nb, fan(nb), rng);
  p.bottleneck_bias = Matrix::Zero(b, 1);
  for (int i = 0; i < config.repeats * config.blocks; ++i) {
    TcnBlock blk;
    blk.in_weight = nn::random_matrix(h, b, fan(b), rng);
    blk.in_bias = Matrix::Zero(h, 1);
    blk.norm1_gain = Matrix::Ones(h, 1);
    blk.norm1_bias = Matrix::Zero(h, 1);
    blk.dw_weight = nn::random_matrix(h, config.kernel, fan(config.kernel), rng);
    blk.dw_bias = Matrix::Zero(h, 1);
    blk.norm2_gain = Matrix::Ones(h, 1);
    blk.norm2_bias = Matrix::Zero(h, 1);
    blk.out_weight = nn::random_matrix(b, h, fan(h), rng);
    blk.out_bias = Matrix::Zero(b, 1);
    p.blocks.push_back(std::move(blk));
  }
  p.mask_weight = nn::random_matrix(nb, b, kMaskWeightScale * fan(b), rng);
  p.mask_bias = Matrix::Constant(nb, 1, kInitMaskBias);
  return p;
}

namespace se_detail {

/// Padded length: S leading zeros, the signal, then zeros up to a multiple of
/// S with at least S trailing.
inline Eigen::Index padded_length(Eigen::Index samples, int stride) {
  const Eigen::Index body = (samples + stride - 1) / stride;
  return stride * (body + 2);
}

}  // namespace se_detail

struct TcnTape {
  Matrix input;
  Matrix h1;
  nn::GlobalNorm norm1;
  Matrix n1;
  Matrix d;
  nn::GlobalNorm norm2;
  Matrix n2;
};

struct SETape {
  Eigen::Index samples = 0;
  Matrix frames;
  Matrix enc_pre;
  Matrix enc;
  nn::GlobalNorm in_norm;
  Matrix z0;
  std::vector<TcnTape> blocks;
  Matrix z;      // separator output before the mask gelu
  Matrix z_act;
  Matrix mask;
  Matrix masked;
};

inline int tcn_dilation(const SEConfig &c, std::size_t block) {
  return 1 << (block % static_cast<std::size_t>(c.blocks));
}

/// Output has the input's length.
inline Vector enhance(const SEParams &p, const Vector &y, SETape *tape = nullptr) {
  const auto &c = p.config;
  const int len = c.window, stride = c.stride();
  if (y.size() < len)
    throw ShapeError("enhance: input shorter than one window (" + std::to_string(y.size()) +
                     " < " + std::to_string(len) + ")");
  const Eigen::Index padded = se_detail::padded_length(y.size(), stride);
  const Eigen::Index n_frames = padded / stride - 1;
  Vector buf = Vector::Zero(padded);
  buf.segment(stride, y.size()) = y;

  SETape local;
  SETape &t = tape ? *tape : local;
  t = SETape{};
  t.samples = y.size();
  t.frames = nn::frame_signal(buf, len, stride, n_frames);
  t.enc_pre = p.enc_basis * t.frames;
  t.enc = nn::gelu(t.enc_pre);

  Matrix z0n = t.in_norm.forward(t.enc, p.in_norm_gain, p.in_norm_bias);
  t.z0 = std::move(z0n);
  Matrix z = nn::affine(p.bottleneck_weight, p.bottleneck_bias, t.z0);
  t.blocks.resize(p.blocks.size());
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    const auto &b = p.blocks[i];
    auto &bt = t.blocks[i];
    bt.input = z;
    bt.h1 = nn::affine(b.in_weight, b.in_bias, z);
    bt.n1 = bt.norm1.forward(nn::gelu(bt.h1), b.norm1_gain, b.norm1_bias);
    bt.d = nn::depthwise_conv(bt.n1, b.dw_weight, b.dw_bias, tcn_dilation(c, i));
    bt.n2 = bt.norm2.forward(nn::gelu(bt.d), b.norm2_gain, b.norm2_bias);
    z += nn::affine(b.out_weight, b.out_bias, bt.n2);
  }
  t.z = std::move(z);
  t.z_act = nn::gelu(t.z);
  t.mask = nn::sigmoid(nn::affine(p.mask_weight, p.mask_bias, t.z_act));
  t.masked = t.mask.cwiseProduct(t.enc);
  const Vector out = nn::overlap_add(p.dec_basis * t.masked, stride, padded);
  return out.segment(stride, y.size());
}

inline Waveform enhance(const SEParams &p, const Waveform &y) {
  return Waveform(enhance(p, y.samples), y.sample_rate);
}

/// Accumulates dL/dparams into grads given dL/d(output).
inline void enhance_backward(const SEParams &p, const SETape &t, const Vector &d_out,
                             SEParams &grads) {
  const auto &c = p.config;
  const int len = c.window, stride = c.stride();
  if (d_out.size() != t.samples) throw ShapeError("enhance_backward: gradient length mismatch");
  Vector d_buf = Vector::Zero(se_detail::padded_length(t.samples, stride));
  d_buf.segment(stride, t.samples) = d_out;
  const Matrix d_frames = nn::frame_signal(d_buf, len, stride, t.masked.cols());

  grads.dec_basis.noalias() += d_frames * t.masked.transpose();
  const Matrix d_masked = p.dec_basis.transpose() * d_frames;
  Matrix d_enc = d_masked.cwiseProduct(t.mask);
  const Matrix d_mask_pre = nn::sigmoid_backward(t.mask, d_masked.cwiseProduct(t.enc));

  Matrix d_z_act;
  nn::affine_backward(p.mask_weight, t.z_act, d_mask_pre, &d_z_act, &grads.mask_weight,
                      &grads.mask_bias);
  Matrix dz = nn::gelu_backward(t.z, d_z_act);

  for (std::size_t i = p.blocks.size(); i-- > 0;) {
    const auto &b = p.blocks[i];
    const auto &bt = t.blocks[i];
    auto &g = grads.blocks[i];
    Matrix d_n2;
    nn::affine_backward(b.out_weight, bt.n2, dz, &d_n2, &g.out_weight, &g.out_bias);
    Matrix d_a2 = bt.norm2.backward(b.norm2_gain, d_n2, &g.norm2_gain, &g.norm2_bias);
    Matrix d_d = nn::gelu_backward(bt.d, d_a2);
    Matrix d_n1;
    nn::depthwise_conv_backward(bt.n1, b.dw_weight, tcn_dilation(c, i), d_d, &d_n1,
                                &g.dw_weight, &g.dw_bias);
    Matrix d_a1 = bt.norm1.backward(b.norm1_gain, d_n1, &g.norm1_gain, &g.norm1_bias);
    Matrix d_h1 = nn::gelu_backward(bt.h1, d_a1);
    Matrix d_in;
    nn::affine_backward(b.in_weight, bt.input, d_h1, &d_in, &g.in_weight, &g.in_bias);
    dz += d_in;
  }

  Matrix d_z0;
  nn::affine_backward(p.bottleneck_weight, t.z0, dz, &d_z0, &grads.bottleneck_weight,
                      &grads.bottleneck_bias);
  d_enc += t.in_norm.backward(p.in_norm_gain, d_z0, &grads.in_norm_gain, &grads.in_norm_bias);
  const Matrix d_pre = nn::gelu_backward(t.enc_pre, d_enc);
  grads.enc_basis.noalias() += d_pre * t.frames.transpose();
}

}  // namespace sslmse

#endif  // SSLMSE_SEMODEL_HPP_
