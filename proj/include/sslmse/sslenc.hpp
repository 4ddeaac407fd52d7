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

#ifndef SSLMSE_SSLENC_HPP_
#define SSLMSE_SSLENC_HPP_

// Frozen multi-layer feature encoder.
//
//   G   = gelu(W_1 * frames(x; k1, s1))      first strided conv, C1 x T1
//   F_0 = W_2 * frames(G; k2, s2)            second strided conv, D x T'
//   F_n = F_{n-1} + LN(gelu(P_n dw_n(F_{n-1}) + b_n))     n = 1..N
//
// The two frontend stages together span `frontend_kernel` samples and
// advance by `hop`: s1 = frontend_stride, k1 = frontend_filter,
// s2 = hop / s1, k2 = (kernel - k1) / s1 + 1, so
// T' = floor((T - kernel) / hop) + 1. Stage-1 filters are Gabor atoms with
// seed-drawn centre frequency, bandwidth and phase.
//
// dw_n is a width-3 depthwise conv over frames, P_n a pointwise D x D mix, LN a
// per-frame normalization across channels with per-channel affine. Only the
// block outputs F_1..F_N are exposed as layers; the frontend is not a layer.
// Parameters never receive gradients; encode_backward returns dL/dx only.

#include <cstdint>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "sslmse/nn.hpp"
#include "sslmse/signal.hpp"

namespace sslmse {

struct EncoderConfig {
  int n_layers = 8;
  int dim = 64;
  int hop = 80;
  int frontend_kernel = 160;
  std::uint64_t seed = 7;
  int frontend_stride = 10;    // s1
  int frontend_channels = 32;  // C1
  int frontend_filter = 120;   // k1

  void validate() const {
    if (n_layers < 1) throw ConfigError("encoder: n_layers must be >= 1");
    if (dim < 1) throw ConfigError("encoder: dim must be >= 1");
    if (hop < 1) throw ConfigError("encoder: hop must be >= 1");
    if (frontend_kernel < 1) throw ConfigError("encoder: frontend_kernel must be >= 1");
    if (frontend_channels < 1) throw ConfigError("encoder: frontend_channels must be >= 1");
    if (frontend_stride < 1 || hop % frontend_stride != 0)
      throw ConfigError("encoder: frontend_stride must divide hop");
    if (frontend_filter < 1 || frontend_kernel < frontend_filter ||
        (frontend_kernel - frontend_filter) % frontend_stride != 0)
      throw ConfigError("encoder: frontend_kernel - frontend_filter must be a nonnegative multiple of frontend_stride");
  }

  int stage1_kernel() const { return frontend_filter; }
  int stage2_stride() const { return hop / frontend_stride; }
  int stage2_kernel() const { return (frontend_kernel - stage1_kernel()) / frontend_stride + 1; }
  Eigen::Index stage1_frames(Eigen::Index samples) const {
    return (samples - stage1_kernel()) / frontend_stride + 1;
  }

  /// T' = floor((T - kernel) / hop) + 1.
  Eigen::Index frames_for(Eigen::Index samples) const {
    if (samples < frontend_kernel) return 0;
    return (samples - frontend_kernel) / hop + 1;
  }
};

struct EncoderBlock {
  Matrix dw_weight;   // D x 3
  Matrix dw_bias;     // D x 1
  Matrix pw_weight;   // D x D
  Matrix pw_bias;     // D x 1
  Matrix norm_gain;   // D x 1
  Matrix norm_bias;   // D x 1
};

struct EncoderParams {
  EncoderConfig config;
  Matrix frontend1;  // C1 x k1
  Matrix frontend2;  // D x (C1 k2), column block i acts on stage-1 frame offset i
  std::vector<EncoderBlock> blocks;

  template <class F>
  void for_each(F &&f) { visit(*this, f); }
  template <class F>
  void for_each(F &&f) const { visit(*this, f); }

 private:
  template <class Self, class F>
  static void visit(Self &s, F &f) {
    f(std::string("frontend1.weight"), s.frontend1);
    f(std::string("frontend2.weight"), s.frontend2);
    for (std::size_t n = 0; n < s.blocks.size(); ++n) {
      const std::string p = "block" + std::to_string(n + 1) + ".";
      auto &b = s.blocks[n];
      f(p + "dw.weight", b.dw_weight);
      f(p + "dw.bias", b.dw_bias);
      f(p + "pw.weight", b.pw_weight);
      f(p + "pw.bias", b.pw_bias);
      f(p + "norm.gain", b.norm_gain);
      f(p + "norm.bias", b.norm_bias);
    }
  }
};

struct FeatureStack {
  std::vector<Matrix> layers;  // N matrices of D x T'
  int hop = 0;
  int sample_rate = kDefaultSampleRate;

  int n_layers() const { return static_cast<int>(layers.size()); }
  Eigen::Index dim() const { return layers.empty() ? 0 : layers[0].rows(); }
  Eigen::Index frames() const { return layers.empty() ? 0 : layers[0].cols(); }
  Real frame_rate() const { return static_cast<Real>(sample_rate) / hop; }
};

inline constexpr int kEncoderDwTaps = 3;

/// Unit-norm Hann-windowed cosines; centre frequency log-uniform over
/// [0.0125, 0.475] cycles/sample-rate, random phase and a random window
/// length between half and all of the filter span.
inline Matrix gabor_bank(int channels, int taps, std::mt19937_64 &rng) {
  std::uniform_real_distribution<Real> u01(0.0, 1.0);
  Matrix w(channels, taps);
  for (int c = 0; c < channels; ++c) {
    const Real f = 0.0125 * std::pow(0.475 / 0.0125, u01(rng));
    const Real phase = 2.0 * M_PI * u01(rng);
    const int span = std::max(1, static_cast<int>(std::lround(taps * (0.5 + 0.5 * u01(rng)))));
    const int start = (taps - span) / 2;
    for (int n = 0; n < taps; ++n) {
      const int k = n - start;
      const Real win = (k < 0 || k >= span) ? 0.0 : 0.5 - 0.5 * std::cos(2.0 * M_PI * (k + 0.5) / span);
      w(c, n) = win * std::cos(2.0 * M_PI * f * n + phase);
    }
    const Real norm = w.row(c).norm();
    if (norm > 0.0) w.row(c) /= norm;
  }
  return nn::round_to_float(w);
}

/// Deterministic in config.seed; every value is float-representable so the
/// checkpoint format stores it losslessly.
inline EncoderParams init_frozen_encoder(const EncoderConfig &config) {
  config.validate();
  std::mt19937_64 rng(derive_seed(config.seed, 0x656e63));
  const int d = config.dim;
  EncoderParams p;
  p.config = config;
  const int k1 = config.stage1_kernel(), c1 = config.frontend_channels;
  const int k2 = config.stage2_kernel();
  p.frontend1 = gabor_bank(c1, k1, rng);
  p.frontend2 = nn::random_matrix(d, c1 * k2, std::sqrt(2.0 / (c1 * k2)), rng);
  for (int n = 0; n < config.n_layers; ++n) {
    EncoderBlock b;
    b.dw_weight = nn::random_matrix(d, kEncoderDwTaps, 1.0 / std::sqrt(Real(kEncoderDwTaps)), rng);
    b.dw_bias = Matrix::Zero(d, 1);
    b.pw_weight = nn::random_matrix(d, d, std::sqrt(2.0 / d), rng);
    b.pw_bias = nn::random_matrix(d, 1, 0.1, rng);
    b.norm_gain = Matrix::Ones(d, 1);
    b.norm_bias = Matrix::Zero(d, 1);
    p.blocks.push_back(std::move(b));
  }
  return p;
}

struct LayerDims {
  int n_layers;
  int dim;
  int hop;
  bool operator==(const LayerDims &) const = default;
};

inline LayerDims layer_dims(const EncoderParams &p) {
  return {static_cast<int>(p.blocks.size()), static_cast<int>(p.frontend2.rows()),
          p.config.hop};
}

/// Intermediate values kept for the input-gradient pass.
struct EncoderTape {
  Eigen::Index samples = 0;
  Matrix stage1_pre;              // C1 x T1 before gelu
  nn::FrameNorm frontend_norm;
  std::vector<Matrix> inputs;     // F_{n-1}
  std::vector<Matrix> dw_out;     // depthwise output
  std::vector<Matrix> pre_act;    // pointwise output before gelu
  std::vector<nn::FrameNorm> norms;
};

namespace enc_detail {

/// Stacks k consecutive columns of g (C x T1) every `stride` columns:
/// column j of the result is [g(:, j s); g(:, j s + 1); ...; g(:, j s + k - 1)].
inline Matrix stack_frames(const Matrix &g, int k, int stride, Eigen::Index frames) {
  const Eigen::Index c = g.rows();
  Matrix out(c * k, frames);
  for (Eigen::Index j = 0; j < frames; ++j)
    for (int i = 0; i < k; ++i) out.block(i * c, j, c, 1) = g.col(j * stride + i);
  return out;
}

/// Adjoint of stack_frames.
inline Matrix unstack_frames(const Matrix &s, Eigen::Index channels, int k, int stride, Eigen::Index cols) {
  Matrix g = Matrix::Zero(channels, cols);
  for (Eigen::Index j = 0; j < s.cols(); ++j)
    for (int i = 0; i < k; ++i) g.col(j * stride + i) += s.block(i * channels, j, channels, 1);
  return g;
}

}  // namespace enc_detail

/// F_0, before any residual block.
inline Matrix frontend_forward(const EncoderParams &p, const Vector &x, EncoderTape *tape = nullptr) {
  const auto &cfg = p.config;
  const Eigen::Index t1 = cfg.stage1_frames(x.size());
  Matrix pre = p.frontend1 * nn::frame_signal(x, cfg.stage1_kernel(), cfg.frontend_stride, t1);
  const Matrix g = nn::gelu(pre);
  if (tape) tape->stage1_pre = std::move(pre);
  const Matrix f = p.frontend2 * enc_detail::stack_frames(g, cfg.stage2_kernel(), cfg.stage2_stride(), cfg.frames_for(x.size()));
  const Matrix one = Matrix::Ones(f.rows(), 1), zero = Matrix::Zero(f.rows(), 1);
  nn::FrameNorm norm;
  Matrix out = norm.forward(f, one, zero);
  if (tape) tape->frontend_norm = std::move(norm);
  return out;
}

inline FeatureStack encode(const EncoderParams &p, const Vector &x, EncoderTape *tape = nullptr) {
  const auto &cfg = p.config;
  if (x.size() < cfg.frontend_kernel)
    throw ShapeError("encode: input too short (" + std::to_string(x.size()) +
                     " samples < kernel " + std::to_string(cfg.frontend_kernel) + ")");
  if (tape) {
    *tape = EncoderTape{};
    tape->samples = x.size();
  }
  Matrix h = frontend_forward(p, x, tape);

  FeatureStack out;
  out.hop = cfg.hop;
  for (const auto &b : p.blocks) {
    Matrix dw = nn::depthwise_conv(h, b.dw_weight, b.dw_bias, 1);
    Matrix pre = nn::affine(b.pw_weight, b.pw_bias, dw);
    nn::FrameNorm norm;
    Matrix next = h + norm.forward(nn::gelu(pre), b.norm_gain, b.norm_bias);
    if (tape) {
      tape->inputs.push_back(std::move(h));
      tape->dw_out.push_back(std::move(dw));
      tape->pre_act.push_back(std::move(pre));
      tape->norms.push_back(std::move(norm));
    }
    out.layers.push_back(next);
    h = std::move(next);
  }
  return out;
}

inline FeatureStack encode(const EncoderParams &p, const Waveform &x, EncoderTape *tape = nullptr) {
  FeatureStack s = encode(p, x.samples, tape);
  s.sample_rate = x.sample_rate;
  return s;
}

/// Given dL/dF_n for every layer (empty matrices count as zero), returns dL/dx.
inline Vector encode_backward(const EncoderParams &p, const EncoderTape &tape,
                              const std::vector<Matrix> &layer_grads) {
  const int n_layers = static_cast<int>(p.blocks.size());
  if (static_cast<int>(layer_grads.size()) != n_layers)
    throw ShapeError("encode_backward: expected one gradient per layer");
  if (static_cast<int>(tape.inputs.size()) != n_layers)
    throw ShapeError("encode_backward: tape does not match encoder");
  const Eigen::Index d = p.frontend2.rows(), frames = tape.inputs[0].cols();
  Matrix g = Matrix::Zero(d, frames);
  for (int n = n_layers - 1; n >= 0; --n) {
    if (layer_grads[n].size() != 0) g += layer_grads[n];
    const auto &b = p.blocks[n];
    Matrix d_act = tape.norms[n].backward(b.norm_gain, g);
    Matrix d_pre = nn::gelu_backward(tape.pre_act[n], d_act);
    Matrix d_dw = b.pw_weight.transpose() * d_pre;
    Matrix d_in;
    nn::depthwise_conv_backward(tape.inputs[n], b.dw_weight, 1, d_dw, &d_in, nullptr, nullptr);
    g += d_in;
  }
  const auto &cfg = p.config;
  const Matrix d_stacked = p.frontend2.transpose() * tape.frontend_norm.backward(Matrix::Ones(d, 1), g);
  const Matrix d_g = enc_detail::unstack_frames(d_stacked, p.frontend1.rows(), cfg.stage2_kernel(),
                                                cfg.stage2_stride(), tape.stage1_pre.cols());
  const Matrix d_pre = nn::gelu_backward(tape.stage1_pre, d_g);
  return nn::overlap_add(p.frontend1.transpose() * d_pre, cfg.frontend_stride, tape.samples);
}

}  // namespace sslmse

#endif  // SSLMSE_SSLENC_HPP_
