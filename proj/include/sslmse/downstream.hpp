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

#ifndef SSLMSE_DOWNSTREAM_HPP_
#define SSLMSE_DOWNSTREAM_HPP_

// Learnable layer combination plus a linear frame classifier, trained on
// frozen encoder features. Used to measure how much an enhancement front-end
// helps (or hurts) a downstream task on noisy input.

#include <algorithm>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "sslmse/datasim.hpp"
#include "sslmse/losses.hpp"
#include "sslmse/nn.hpp"
#include "sslmse/semodel.hpp"
#include "sslmse/sslenc.hpp"

namespace sslmse {

/// Softmax-parameterized layer weights.
struct TaskWeights {
  Matrix logits;  // N x 1

  Vector weights() const {
    const Vector z = logits.col(0).array() - logits.maxCoeff();
    const Vector e = z.array().exp();
    return e / e.sum();
  }
};

struct ProbeParams {
  Matrix weight;  // C x D
  Matrix bias;    // C x 1
};

struct DownstreamParams {
  TaskWeights task;
  ProbeParams probe;

  int n_tokens() const { return static_cast<int>(probe.weight.rows()); }

  template <class F>
  void for_each(F &&f) { visit(*this, f); }
  template <class F>
  void for_each(F &&f) const { visit(*this, f); }

 private:
  template <class Self, class F>
  static void visit(Self &s, F &f) {
    f(std::string("task.logits"), s.task.logits);
    f(std::string("probe.weight"), s.probe.weight);
    f(std::string("probe.bias"), s.probe.bias);
  }
};

/// F = sum_n w_n F_n with w = softmax(logits).
inline Matrix weighted_features(const FeatureStack &stack, const TaskWeights &tw) {
  if (tw.logits.rows() != stack.n_layers())
    throw ShapeError("weighted_features: " + std::to_string(tw.logits.rows()) + " task weights for " +
                     std::to_string(stack.n_layers()) + " layers");
  return weighted_sum(stack, tw.weights());
}

inline DownstreamParams init_downstream(int n_layers, int dim, int n_tokens, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0x7072));
  DownstreamParams p;
  p.task.logits = Matrix::Zero(n_layers, 1);
  p.probe.weight = nn::random_matrix(n_tokens, dim, 0.01, rng);
  p.probe.bias = Matrix::Zero(n_tokens, 1);
  return p;
}

/// Encoder features of one utterance with per-frame targets.
struct ProbeItem {
  FeatureStack features;
  std::vector<int> labels;
};

enum class ProbeInput { kNoisy, kClean };

/// Pipeline order: optional enhancement -> encoder. Labels are aligned to
/// encoder frames.
inline std::vector<ProbeItem> extract_probe_items(const std::vector<const CorpusItem *> &items,
                                                  const EncoderParams &encoder, const SEParams *frontend,
                                                  ProbeInput input) {
  std::vector<ProbeItem> out;
  out.reserve(items.size());
  for (const CorpusItem *it : items) {
    Vector x = input == ProbeInput::kNoisy ? it->mixture.samples : it->source.samples;
    if (frontend) x = enhance(*frontend, x);
    ProbeItem pi;
    pi.features = encode(encoder, x);
    pi.labels = frame_labels(it->labels, x.size(), pi.features.frames(), encoder.config.hop,
                             encoder.config.frontend_kernel);
    out.push_back(std::move(pi));
  }
  return out;
}

inline void check_probe_item(const ProbeItem &it, const DownstreamParams &p) {
  if (it.features.n_layers() != p.task.logits.rows() || it.features.dim() != p.probe.weight.cols())
    throw ShapeError("probe: feature dimensions do not match the probe");
  if (static_cast<Eigen::Index>(it.labels.size()) != it.features.frames())
    throw ShapeError("probe: label/frame misalignment");
}

inline Matrix probe_logits(const DownstreamParams &p, const Matrix &combined) {
  return nn::affine(p.probe.weight, p.probe.bias, combined);
}

/// Mean frame cross-entropy over the batch; accumulates gradients when given.
inline Real probe_loss(const DownstreamParams &p, const std::vector<const ProbeItem *> &batch,
                       DownstreamParams *grads) {
  Eigen::Index total_frames = 0;
  for (const ProbeItem *it : batch) total_frames += it->features.frames();
  if (total_frames == 0) throw ValueError("probe: empty batch");
  const Real scale = 1.0 / static_cast<Real>(total_frames);
  const Vector w = p.task.weights();
  Real loss = 0.0;
  Vector d_w = Vector::Zero(w.size());
  for (const ProbeItem *it : batch) {
    check_probe_item(*it, p);
    const Matrix combined = weighted_sum(it->features, w);
    const Matrix logits = probe_logits(p, combined);
    Matrix prob(logits.rows(), logits.cols());
    for (Eigen::Index t = 0; t < logits.cols(); ++t) {
      const Vector z = logits.col(t).array() - logits.col(t).maxCoeff();
      const Real lse = std::log(z.array().exp().sum());
      const int y = it->labels[static_cast<std::size_t>(t)];
      if (y < 0 || y >= logits.rows()) throw ShapeError("probe: label out of range");
      loss -= scale * (z[y] - lse);
      prob.col(t) = (z.array() - lse).exp();
      prob(y, t) -= 1.0;
    }
    if (!grads) continue;
    const Matrix d_logits = scale * prob;
    Matrix d_combined;
    nn::affine_backward(p.probe.weight, combined, d_logits, &d_combined, &grads->probe.weight,
                        &grads->probe.bias);
    for (int n = 0; n < it->features.n_layers(); ++n)
      d_w[n] += d_combined.cwiseProduct(it->features.layers[static_cast<std::size_t>(n)]).sum();
  }
  if (grads) {
    // softmax Jacobian: d logit_k = w_k (d_w_k - <w, d_w>)
    const Real mean = w.dot(d_w);
    grads->task.logits.col(0) += w.cwiseProduct((d_w.array() - mean).matrix());
  }
  return loss;
}

inline Real eval_probe(const std::vector<ProbeItem> &items, const DownstreamParams &p) {
  Eigen::Index correct = 0, total = 0;
  const Vector w = p.task.weights();
  for (const auto &it : items) {
    check_probe_item(it, p);
    const Matrix logits = probe_logits(p, weighted_sum(it.features, w));
    for (Eigen::Index t = 0; t < logits.cols(); ++t) {
      Eigen::Index best;
      logits.col(t).maxCoeff(&best);
      correct += best == it.labels[static_cast<std::size_t>(t)];
      ++total;
    }
  }
  if (total == 0) throw ValueError("eval_probe: no frames");
  return static_cast<Real>(correct) / static_cast<Real>(total);
}

struct ProbeOptions {
  int epochs = 20;
  Real lr = 1e-2;
  int batch_size = 8;
};

struct ProbeResult {
  DownstreamParams params;
  Real dev_accuracy = 0.0;
  std::vector<Real> train_loss;  // per epoch
};

/// Trains only the task weights and the classifier; features are fixed.
inline ProbeResult train_probe(const std::vector<ProbeItem> &train, const std::vector<ProbeItem> &dev,
                               int n_tokens, std::uint64_t seed, const ProbeOptions &opt = {}) {
  if (train.empty()) throw ValueError("train_probe: empty corpus");
  const auto &f0 = train.front().features;
  ProbeResult res;
  res.params = init_downstream(f0.n_layers(), static_cast<int>(f0.dim()), n_tokens, seed);
  nn::Adam adam;
  std::vector<std::size_t> order(train.size());
  for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, 0x70726f6265, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    Real epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch_size)) {
      std::vector<const ProbeItem *> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + opt.batch_size); ++k)
        batch.push_back(&train[order[k]]);
      DownstreamParams grads = nn::zeros_like(res.params);
      const Real loss = probe_loss(res.params, batch, &grads);
      if (!std::isfinite(loss)) throw NumericError("train_probe: non-finite loss");
      epoch_loss += loss * static_cast<Real>(batch.size()) / static_cast<Real>(train.size());
      adam.step(res.params, grads, opt.lr);
    }
    res.train_loss.push_back(epoch_loss);
  }
  res.dev_accuracy = dev.empty() ? 0.0 : eval_probe(dev, res.params);
  return res;
}

}  // namespace sslmse

#endif  // SSLMSE_DOWNSTREAM_HPP_
