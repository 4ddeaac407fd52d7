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

#ifndef SSLMSE_LOSSES_HPP_
#define SSLMSE_LOSSES_HPP_

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sslmse/semodel.hpp"
#include "sslmse/signal.hpp"
#include "sslmse/sslenc.hpp"

namespace sslmse {

enum class LayerScheme { kLast, kAll, kLatterHalf };

inline std::string to_string(LayerScheme s) {
  switch (s) {
    case LayerScheme::kLast: return "last";
    case LayerScheme::kAll: return "all";
    case LayerScheme::kLatterHalf: return "latter_half";
  }
  return "?";
}

inline LayerScheme parse_layer_scheme(std::string_view name) {
  if (name == "last") return LayerScheme::kLast;
  if (name == "all") return LayerScheme::kAll;
  if (name == "latter_half" || name == "latter-half") return LayerScheme::kLatterHalf;
  throw ConfigError("unknown layer-weight scheme '" + std::string(name) + "'");
}

/// Nonnegative per-layer weights summing to one.
struct LayerWeights {
  Vector w;
  int size() const { return static_cast<int>(w.size()); }
};

/// last: indicator on layer N. all: 1/N each. latter_half: 1/(N - floor(N/2))
/// on layers floor(N/2)+1..N (1-based), zero below.
inline LayerWeights make_layer_weights(LayerScheme scheme, int n_layers) {
  if (n_layers < 1) throw ValueError("make_layer_weights: N must be >= 1");
  LayerWeights lw{Vector::Zero(n_layers)};
  switch (scheme) {
    case LayerScheme::kLast:
      lw.w[n_layers - 1] = 1.0;
      break;
    case LayerScheme::kAll:
      lw.w.setConstant(1.0 / n_layers);
      break;
    case LayerScheme::kLatterHalf: {
      const int first = n_layers / 2;  // 0-based index of layer floor(N/2)+1
      lw.w.tail(n_layers - first).setConstant(1.0 / (n_layers - first));
      break;
    }
  }
  return lw;
}

/// sum_n w_n F_n.
inline Matrix weighted_sum(const FeatureStack &stack, const Vector &w) {
  if (stack.n_layers() != w.size())
    throw ShapeError("weighted_sum: " + std::to_string(w.size()) + " weights for " +
                     std::to_string(stack.n_layers()) + " layers");
  Matrix out = Matrix::Zero(stack.dim(), stack.frames());
  for (int n = 0; n < stack.n_layers(); ++n) {
    if (w[n] != 0.0) out += w[n] * stack.layers[n];
  }
  return out;
}

inline void check_same_shape(const FeatureStack &a, const FeatureStack &b) {
  if (a.n_layers() != b.n_layers() || a.dim() != b.dim() || a.frames() != b.frames())
    throw ShapeError("ssl_mse: feature stacks differ in shape");
  for (int n = 0; n < a.n_layers(); ++n)
    if (a.layers[n].rows() != b.layers[n].rows() || a.layers[n].cols() != b.layers[n].cols())
      throw ShapeError("ssl_mse: layer " + std::to_string(n + 1) + " shape mismatch");
}

/// |sum_n w_n (F_enh_n - F_clean_n)|_F^2 / (D T'). The layers are combined
/// before the distance is taken.
inline Real ssl_mse(const FeatureStack &enhanced, const FeatureStack &clean,
                    const LayerWeights &weights) {
  check_same_shape(enhanced, clean);
  const Matrix diff = weighted_sum(enhanced, weights.w) - weighted_sum(clean, weights.w);
  return diff.squaredNorm() / static_cast<Real>(diff.size());
}

/// dL/dF_enh_n per layer; layers with zero weight get an empty matrix.
inline std::vector<Matrix> ssl_mse_grad(const FeatureStack &enhanced, const FeatureStack &clean,
                                        const LayerWeights &weights) {
  check_same_shape(enhanced, clean);
  const Matrix diff = weighted_sum(enhanced, weights.w) - weighted_sum(clean, weights.w);
  const Matrix g = (2.0 / static_cast<Real>(diff.size())) * diff;
  std::vector<Matrix> out(enhanced.n_layers());
  for (int n = 0; n < enhanced.n_layers(); ++n)
    if (weights.w[n] != 0.0) out[n] = weights.w[n] * g;
  return out;
}

/// Negated sd_snr, so lower is better.
inline Real snr_training_loss(const Vector &estimate, const Vector &reference) {
  if (estimate.size() != reference.size())
    throw ShapeError("snr_training_loss: length mismatch");
  return -sd_snr(estimate, reference);
}

inline Vector snr_training_loss_grad(const Vector &estimate, const Vector &reference) {
  return -sd_snr_grad(estimate, reference);
}

struct LossConfig {
  Real alpha = 0.1;
  LayerScheme scheme = LayerScheme::kLast;
  Real eps = kRatioFloor;
};

struct LossBreakdown {
  Real ssl_mse = 0.0;
  Real snr_term = 0.0;
  Real total = 0.0;
};

inline LossBreakdown multitask_loss(Real ssl_mse_value, Real snr_loss_value, Real alpha) {
  if (!(alpha >= 0.0)) throw ValueError("multitask_loss: alpha must be >= 0");
  return {ssl_mse_value, snr_loss_value, ssl_mse_value + alpha * snr_loss_value};
}

/// One (noisy, clean) utterance. Clean features are cached on first use.
struct TrainPair {
  std::string id;
  Vector noisy;
  Vector clean;
  mutable std::optional<FeatureStack> clean_features;

  const FeatureStack &clean_stack(const EncoderParams &enc) const {
    if (!clean_features) clean_features = encode(enc, clean);
    return *clean_features;
  }
};

/// What the enhancement model is trained on. Without an encoder the objective
/// is the SNR loss alone (pretraining); with one it is the multitask loss.
struct Objective {
  const EncoderParams *encoder = nullptr;
  LossConfig loss;

  static Objective snr_only() { return {}; }
  static Objective multitask(const EncoderParams &enc, LossConfig cfg) { return {&enc, cfg}; }
  bool uses_encoder() const { return encoder != nullptr; }
};

/// Loss of one utterance; when grads is non-null, dL/dtheta is accumulated
/// into it with the given scale.
inline LossBreakdown utterance_loss(const SEParams &se, const TrainPair &pair,
                                    const Objective &obj, SEParams *grads = nullptr,
                                    Real scale = 1.0) {
  SETape tape;
  const Vector enhanced = enhance(se, pair.noisy, grads ? &tape : nullptr);
  const Real snr_term = snr_training_loss(enhanced, pair.clean);
  if (!obj.uses_encoder()) {
    if (grads) enhance_backward(se, tape, scale * snr_training_loss_grad(enhanced, pair.clean), *grads);
    return {0.0, snr_term, snr_term};
  }
  const EncoderParams &enc = *obj.encoder;
  const LayerWeights lw = make_layer_weights(obj.loss.scheme, static_cast<int>(enc.blocks.size()));
  EncoderTape enc_tape;
  const FeatureStack f_enh = encode(enc, enhanced, grads ? &enc_tape : nullptr);
  const FeatureStack &f_clean = pair.clean_stack(enc);
  const LossBreakdown lb = multitask_loss(ssl_mse(f_enh, f_clean, lw), snr_term, obj.loss.alpha);
  if (grads) {
    Vector d_out = encode_backward(enc, enc_tape, ssl_mse_grad(f_enh, f_clean, lw));
    if (obj.loss.alpha != 0.0)
      d_out += obj.loss.alpha * snr_training_loss_grad(enhanced, pair.clean);
    enhance_backward(se, tape, scale * d_out, *grads);
  }
  return lb;
}

struct LossGradients {
  SEParams grads;       // same layout as the enhancement parameters
  LossBreakdown mean;   // averaged over the batch
};

/// Gradient of the batch-mean loss with respect to every enhancement
/// parameter. The encoder is read-only here and has no gradient slot.
inline LossGradients loss_gradients(const SEParams &se, const std::vector<const TrainPair *> &batch,
                                    const Objective &obj, long batch_id = -1) {
  if (batch.empty()) throw ValueError("loss_gradients: empty batch");
  LossGradients out{nn::zeros_like(se), {}};
  const Real scale = 1.0 / static_cast<Real>(batch.size());
  for (const TrainPair *pair : batch) {
    const LossBreakdown lb = utterance_loss(se, *pair, obj, &out.grads, scale);
    if (!std::isfinite(lb.total))
      throw NumericError("non-finite loss in batch " + std::to_string(batch_id) + " (item " +
                         pair->id + ")");
    out.mean.ssl_mse += scale * lb.ssl_mse;
    out.mean.snr_term += scale * lb.snr_term;
    out.mean.total += scale * lb.total;
  }
  if (!nn::all_finite(out.grads))
    throw NumericError("non-finite gradient in batch " + std::to_string(batch_id));
  return out;
}

}  // namespace sslmse

#endif  // SSLMSE_LOSSES_HPP_
