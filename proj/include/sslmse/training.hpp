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

#ifndef SSLMSE_TRAINING_HPP_
#define SSLMSE_TRAINING_HPP_

// Two-stage recipe for the enhancement model: SNR-loss pretraining, then
// multitask (feature MSE + alpha * SNR) fine-tuning through the frozen
// encoder. Adam, plateau learning-rate decay and best-dev checkpointing.

#include <algorithm>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sslmse/checkpoint.hpp"
#include "sslmse/datasim.hpp"
#include "sslmse/losses.hpp"

namespace sslmse {

struct TrainConfig {
  Real lr_pretrain = 5e-4;
  Real lr_finetune = 1e-4;
  Real plateau_factor = 0.75;
  int plateau_patience = 2;
  int max_epochs_pretrain = 30;
  int max_epochs_finetune = 15;
  int batch_size = 8;
  Real clip_norm = 5.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(plateau_factor > 0.0 && plateau_factor < 1.0))
      throw ConfigError("train: plateau_factor must be in (0, 1)");
    if (plateau_patience < 1) throw ConfigError("train: plateau_patience must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (max_epochs_pretrain < 1 || max_epochs_finetune < 1)
      throw ConfigError("train: epoch counts must be >= 1");
    if (!(lr_pretrain > 0.0) || !(lr_finetune > 0.0)) throw ConfigError("train: learning rates must be > 0");
  }
};

/// Multiplies the rate by `factor` once the best dev loss has gone
/// `patience` consecutive epochs without strict improvement; the counter
/// restarts after every reduction.
class PlateauScheduler {
 public:
  PlateauScheduler(Real lr, Real factor = 0.75, int patience = 2)
      : lr_(lr), factor_(factor), patience_(patience) {}

  Real step(Real dev_loss) {
    if (!std::isfinite(dev_loss)) throw NumericError("plateau schedule: non-finite dev loss");
    if (!has_best_ || dev_loss < best_) {
      best_ = dev_loss;
      has_best_ = true;
      stale_ = 0;
    } else if (++stale_ >= patience_) {
      lr_ *= factor_;
      stale_ = 0;
    }
    return lr_;
  }

  Real lr() const { return lr_; }
  Real best() const { return best_; }
  int stale_epochs() const { return stale_; }

 private:
  Real lr_;
  Real factor_;
  int patience_;
  Real best_ = 0.0;
  bool has_best_ = false;
  int stale_ = 0;
};

struct TrainLogRow {
  int epoch = 0;
  Real lr = 0.0;
  Real train_total = 0.0;
  Real dev_total = 0.0;
  Real dev_ssl_mse = 0.0;  // last-layer feature MSE
  Real dev_si_sdr = 0.0;
};

struct LossLogRow {
  int epoch = 0;
  std::string split;
  LossBreakdown loss;
  Real alpha = 0.0;
  std::string scheme;
};

inline constexpr const char *kTrainLogHeader = "epoch,lr,train_total,dev_total,dev_ssl_mse,dev_si_sdr";
inline constexpr const char *kLossLogHeader = "epoch,split,ssl_mse,snr_term,total,alpha,scheme";

inline std::string train_log_csv(const std::vector<TrainLogRow> &rows) {
  std::ostringstream out;
  out << kTrainLogHeader << "\n";
  for (const auto &r : rows)
    out << r.epoch << "," << format_metric(r.lr) << "," << format_metric(r.train_total) << ","
        << format_metric(r.dev_total) << "," << format_metric(r.dev_ssl_mse) << ","
        << format_metric(r.dev_si_sdr) << "\n";
  return out.str();
}

inline std::string loss_log_csv(const std::vector<LossLogRow> &rows) {
  std::ostringstream out;
  out << kLossLogHeader << "\n";
  for (const auto &r : rows)
    out << r.epoch << "," << r.split << "," << format_metric(r.loss.ssl_mse) << ","
        << format_metric(r.loss.snr_term) << "," << format_metric(r.loss.total) << ","
        << format_metric(r.alpha) << "," << r.scheme << "\n";
  return out.str();
}

inline std::vector<TrainPair> make_pairs(const std::vector<const CorpusItem *> &items) {
  std::vector<TrainPair> out;
  out.reserve(items.size());
  for (const CorpusItem *it : items) out.push_back({it->id, it->mixture.samples, it->source.samples, {}});
  return out;
}

struct DevMetrics {
  LossBreakdown loss;     // mean objective on dev
  Real ssl_mse_last = 0;  // mean last-layer feature MSE (if an encoder is given)
  Real si_sdr = 0;        // mean SI-SDR of the enhanced output
};

/// Dev metrics for an enhancement model. `monitor` supplies the encoder for
/// the last-layer feature MSE; without it that field stays 0.
inline DevMetrics evaluate_se(const SEParams &se, const std::vector<TrainPair> &dev, const Objective &obj,
                              const EncoderParams *monitor) {
  DevMetrics m;
  if (dev.empty()) throw ValueError("evaluate_se: empty dev set");
  const Real scale = 1.0 / static_cast<Real>(dev.size());
  const LayerWeights last = monitor ? make_layer_weights(LayerScheme::kLast, static_cast<int>(monitor->blocks.size()))
                                    : LayerWeights{};
  for (const auto &pair : dev) {
    const Vector enhanced = enhance(se, pair.noisy);
    const Real snr_term = snr_training_loss(enhanced, pair.clean);
    LossBreakdown lb{0.0, snr_term, snr_term};
    Real mse_last = 0.0;
    if (monitor) {
      const FeatureStack f = encode(*monitor, enhanced);
      mse_last = ssl_mse(f, pair.clean_stack(*monitor), last);
    }
    if (obj.uses_encoder()) {
      if (obj.encoder == monitor && obj.loss.scheme == LayerScheme::kLast) {
        lb = multitask_loss(mse_last, snr_term, obj.loss.alpha);
      } else {
        const FeatureStack f = encode(*obj.encoder, enhanced);
        const LayerWeights lw = make_layer_weights(obj.loss.scheme, static_cast<int>(obj.encoder->blocks.size()));
        lb = multitask_loss(ssl_mse(f, pair.clean_stack(*obj.encoder), lw), snr_term, obj.loss.alpha);
      }
    }
    m.loss.ssl_mse += scale * lb.ssl_mse;
    m.loss.snr_term += scale * lb.snr_term;
    m.loss.total += scale * lb.total;
    m.ssl_mse_last += scale * mse_last;
    m.si_sdr += scale * si_sdr(enhanced, pair.clean);
  }
  return m;
}

struct StageOptions {
  Real initial_lr = 5e-4;
  int epochs = 30;
  std::uint64_t stream = 0;             // separates shuffling streams of different stages
  std::filesystem::path checkpoint_path;  // best-dev checkpoint; empty = do not save
  const EncoderParams *monitor = nullptr;
};

struct StageResult {
  SEParams best;                 // float-rounded, identical to the saved checkpoint
  Real best_dev_loss = 0.0;
  int best_epoch = 0;
  std::vector<TrainLogRow> log;
  std::vector<LossLogRow> loss_log;
  std::vector<Real> lr_trace;    // learning rate used in each epoch
  std::string encoder_sha_before, encoder_sha_after;
};

/// One training stage. The model evaluated on dev each epoch is the
/// float-rounded copy of the parameters, so a reloaded best checkpoint
/// reproduces best_dev_loss exactly.
inline StageResult train_stage(const std::vector<TrainPair> &train, const std::vector<TrainPair> &dev,
                               SEParams params, const Objective &obj, const TrainConfig &cfg,
                               const StageOptions &opt) {
  cfg.validate();
  if (train.empty()) throw ValueError("train_stage: empty training set");
  StageResult res;
  const EncoderParams *frozen = obj.encoder ? obj.encoder : opt.monitor;
  if (frozen) res.encoder_sha_before = params_sha256(*frozen);

  nn::Adam adam;
  PlateauScheduler sched(opt.initial_lr, cfg.plateau_factor, cfg.plateau_patience);
  const std::string scheme = obj.uses_encoder() ? to_string(obj.loss.scheme) : "none";
  const Real alpha = obj.uses_encoder() ? obj.loss.alpha : 1.0;
  std::vector<std::size_t> order(train.size());
  long batch_id = 0;
  bool have_best = false;

  for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
    const Real lr = sched.lr();
    res.lr_trace.push_back(lr);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(cfg.seed, 0x747261696e + opt.stream, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    LossBreakdown train_mean;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<const TrainPair *> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k)
        batch.push_back(&train[order[k]]);
      LossGradients lg;
      try {
        lg = loss_gradients(params, batch, obj, batch_id++);
      } catch (const NumericError &e) {
        throw NumericError("epoch " + std::to_string(epoch) + ": " + e.what());
      }
      const Real norm = nn::global_norm(lg.grads);
      if (norm > cfg.clip_norm) {
        lg.grads.for_each([&](const std::string &, Matrix &m) { m *= cfg.clip_norm / norm; });
      }
      adam.step(params, lg.grads, lr);
      const Real w = static_cast<Real>(batch.size()) / static_cast<Real>(train.size());
      train_mean.ssl_mse += w * lg.mean.ssl_mse;
      train_mean.snr_term += w * lg.mean.snr_term;
      train_mean.total += w * lg.mean.total;
    }

    SEParams snapshot = nn::round_to_float(params);
    const DevMetrics dm = evaluate_se(snapshot, dev, obj, opt.monitor);
    if (!std::isfinite(dm.loss.total)) throw NumericError("epoch " + std::to_string(epoch) + ": non-finite dev loss");
    res.log.push_back({epoch, lr, train_mean.total, dm.loss.total, dm.ssl_mse_last, dm.si_sdr});
    res.loss_log.push_back({epoch, "train", train_mean, alpha, scheme});
    res.loss_log.push_back({epoch, "dev", dm.loss, alpha, scheme});
    if (!have_best || dm.loss.total < res.best_dev_loss) {
      have_best = true;
      res.best_dev_loss = dm.loss.total;
      res.best_epoch = epoch;
      res.best = std::move(snapshot);
      if (!opt.checkpoint_path.empty()) {
        Checkpoint ck = to_checkpoint(res.best);
        ck.set_scalar("state.epoch", epoch);
        ck.set_scalar("state.lr", lr);
        ck.set_scalar("state.best_dev_loss", res.best_dev_loss);
        save_checkpoint(opt.checkpoint_path, ck);
      }
    }
    sched.step(dm.loss.total);
  }
  if (frozen) {
    res.encoder_sha_after = params_sha256(*frozen);
    if (res.encoder_sha_after != res.encoder_sha_before)
      throw Error("frozen encoder parameters changed during training");
  }
  return res;
}

inline StageResult pretrain_se(const std::vector<TrainPair> &train, const std::vector<TrainPair> &dev,
                               const SEParams &init, const TrainConfig &cfg,
                               const std::filesystem::path &checkpoint = {},
                               const EncoderParams *monitor = nullptr) {
  StageOptions opt;
  opt.initial_lr = cfg.lr_pretrain;
  opt.epochs = cfg.max_epochs_pretrain;
  opt.stream = 1;
  opt.checkpoint_path = checkpoint;
  opt.monitor = monitor;
  return train_stage(train, dev, init, Objective::snr_only(), cfg, opt);
}

inline StageResult finetune_sslmse(const std::vector<TrainPair> &train, const std::vector<TrainPair> &dev,
                                   const SEParams &pretrained, const EncoderParams &encoder,
                                   const LossConfig &loss, const TrainConfig &cfg,
                                   const std::filesystem::path &checkpoint = {}) {
  if (!train.empty() && train.front().clean.size() < encoder.config.frontend_kernel)
    throw ShapeError("finetune: utterances shorter than the encoder kernel");
  StageOptions opt;
  opt.initial_lr = cfg.lr_finetune;
  opt.epochs = cfg.max_epochs_finetune;
  opt.stream = 2;
  opt.checkpoint_path = checkpoint;
  opt.monitor = &encoder;
  return train_stage(train, dev, pretrained, Objective::multitask(encoder, loss), cfg, opt);
}

// ---------------------------------------------------------------------------
// Gradient verification

struct TensorGradError {
  std::string name;
  Real rel_error = 0.0;  // |analytic - numeric| / (|analytic| + |numeric|)
};

struct GradCheckReport {
  Real max_rel_error = 0.0;
  Eigen::Index parameters = 0;
  std::vector<TensorGradError> tensors;
};

/// Compares an analytic gradient with central differences of `loss`, tensor
/// by tensor. `params` is perturbed in place and restored.
template <class P>
GradCheckReport compare_with_finite_differences(P &params, const P &analytic,
                                                const std::function<Real()> &loss, Real step = 1e-3) {
  GradCheckReport rep;
  auto p = nn::tensor_list(params);
  auto g = nn::tensor_list(analytic);
  std::vector<std::string> names;
  params.for_each([&](const std::string &n, const Matrix &) { names.push_back(n); });
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (!g[t]->allFinite()) throw NumericError("grad_check: non-finite analytic gradient in " + names[t]);
    Matrix numeric(p[t]->rows(), p[t]->cols());
    for (Eigen::Index i = 0; i < p[t]->size(); ++i) {
      Real &v = p[t]->data()[i];
      const Real keep = v;
      v = keep + step;
      const Real up = loss();
      v = keep - step;
      const Real down = loss();
      v = keep;
      numeric.data()[i] = (up - down) / (2.0 * step);
    }
    const Real den = g[t]->norm() + numeric.norm();
    const Real err = den == 0.0 ? 0.0 : (*g[t] - numeric).norm() / den;
    rep.tensors.push_back({names[t], err});
    rep.max_rel_error = std::max(rep.max_rel_error, err);
    rep.parameters += p[t]->size();
  }
  return rep;
}

struct GradCheckSetup {
  SEConfig se{16, 8, 8, 1, 2, 16, 3};
  EncoderConfig encoder{4, 8, 8, 16, 5, 2, 6, 8};
  Eigen::Index samples = 200;
  Real step = 1e-3;
};

inline constexpr Eigen::Index kGradCheckMaxParams = 5000;

/// Multitask-loss gradient of a small model on a random (noisy, clean) pair
/// against central differences.
inline GradCheckReport grad_check(const GradCheckSetup &setup, const LossConfig &loss, std::uint64_t seed) {
  SEParams se = init_se_model(setup.se, seed);
  if (nn::parameter_count(se) > kGradCheckMaxParams)
    throw ValueError("grad_check: model has more than 5000 parameters");
  EncoderConfig ec = setup.encoder;
  ec.seed = derive_seed(seed, 0x656e);
  const EncoderParams enc = init_frozen_encoder(ec);

  std::mt19937_64 rng(derive_seed(seed, 0x6763));
  std::normal_distribution<Real> gauss(0.0, 1.0);
  TrainPair pair;
  pair.id = "gradcheck";
  pair.clean.resize(setup.samples);
  pair.noisy.resize(setup.samples);
  for (Eigen::Index i = 0; i < setup.samples; ++i) {
    pair.clean[i] = 0.3 * std::sin(0.07 * i) + 0.1 * gauss(rng);
    pair.noisy[i] = pair.clean[i] + 0.1 * gauss(rng);
  }
  const Objective obj = Objective::multitask(enc, loss);
  SEParams grads = nn::zeros_like(se);
  utterance_loss(se, pair, obj, &grads);
  return compare_with_finite_differences(se, grads, [&] { return utterance_loss(se, pair, obj).total; },
                                         setup.step);
}

}  // namespace sslmse

#endif  // SSLMSE_TRAINING_HPP_
