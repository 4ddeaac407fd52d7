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

#ifndef SSLMSE_EXPERIMENT_HPP_
#define SSLMSE_EXPERIMENT_HPP_

// Subcommands of the experiment driver. Each one reads its prerequisites
// from the output directory, writes its artifacts into a subdirectory of it
// and leaves a summary.json next to them.
//
//   <out>/corpus/            simulate
//   <out>/encoder.ckpt       frozen encoder used by every later stage
//   <out>/pretrain/          pretrain     (se.ckpt, train_log.csv, loss_log.csv)
//   <out>/finetune/          finetune     (same layout)
//   <out>/probe/             train-probe  (official.ckpt, noise_robust.ckpt, probe_results.csv)
//   <out>/evaluate/          evaluate     (metrics.csv, probe_results.csv)
//   <out>/sweep/             sweep-alpha  (sweep.csv, plot_data.csv, alpha_<a>/)
//   <out>/gradcheck/         gradcheck    (gradcheck.csv)
//   <out>/report/            report       (report.csv, report.txt)

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sslmse/config.hpp"
#include "sslmse/downstream.hpp"
#include "sslmse/training.hpp"
#include "sslmse/wav.hpp"

namespace sslmse {

namespace fs = std::filesystem;

inline const std::vector<std::string> &subcommands() {
  static const std::vector<std::string> names = {"simulate", "pretrain",    "finetune",  "train-probe",
                                                 "evaluate", "sweep-alpha", "gradcheck", "report"};
  return names;
}

/// A required artifact from an earlier subcommand is absent.
class MissingPrerequisite : public Error {
 public:
  using Error::Error;
};

inline constexpr const char *kProbeResultsHeader = "frontend_tag,train_mode,split,input,accuracy";
inline constexpr const char *kMetricsHeader =
    "frontend,alpha,scheme,split,si_sdr,ssl_mse_last,probe_acc_noisy,probe_acc_clean";
inline constexpr const char *kSweepHeader = "alpha,dev_si_sdr,dev_ssl_mse_last,probe_acc_noisy,probe_acc_clean";
inline constexpr const char *kPlotDataHeader = "alpha,axis_position,series,value";
inline constexpr const char *kGradCheckHeader = "scheme,alpha,max_rel_error,parameters,pass";
inline constexpr const char *kReportHeader =
    "row,frontend,alpha,scheme,split,si_sdr,ssl_mse_last,probe_acc_noisy,probe_acc_clean,source";
inline constexpr Real kGradCheckTolerance = 1e-3;

/// `git describe --always --dirty`, or "unknown" outside a work tree.
inline std::string git_describe() {
  std::string out;
  if (FILE *pipe = popen("git describe --always --dirty 2>/dev/null", "r")) {
    char buf[256];
    while (std::fgets(buf, sizeof(buf), pipe)) out += buf;
    pclose(pipe);
  }
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
  return out.empty() ? "unknown" : out;
}

// ---------------------------------------------------------------------------
// Probe checkpoints

inline Checkpoint to_checkpoint(const DownstreamParams &p) {
  Checkpoint ck;
  append_tensors(ck, p);
  ck.scalars = {{"probe.n_layers", static_cast<double>(p.task.logits.rows())},
                {"probe.dim", static_cast<double>(p.probe.weight.cols())},
                {"probe.n_tokens", static_cast<double>(p.probe.weight.rows())}};
  return ck;
}

inline DownstreamParams downstream_from_checkpoint(const Checkpoint &ck) {
  DownstreamParams p = init_downstream(static_cast<int>(required_scalar(ck, "probe.n_layers")),
                                       static_cast<int>(required_scalar(ck, "probe.dim")),
                                       static_cast<int>(required_scalar(ck, "probe.n_tokens")), 0);
  read_tensors(ck, p);
  return p;
}

// ---------------------------------------------------------------------------
// Run context

class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg, std::ostream *log = nullptr) : cfg_(std::move(cfg)), log_(log) {
    cfg_.validate();
    out_ = cfg_.output_dir;
  }

  const ExperimentConfig &config() const { return cfg_; }
  const fs::path &out() const { return out_; }

  /// Runs one subcommand. Returns the process exit status (0 on success,
  /// 1 if a gradient check fails).
  int run(const std::string &sub) {
    if (sub == "simulate") return simulate();
    if (sub == "pretrain") return pretrain();
    if (sub == "finetune") return finetune();
    if (sub == "train-probe") return train_probe_cmd();
    if (sub == "evaluate") return evaluate();
    if (sub == "sweep-alpha") return sweep_alpha();
    if (sub == "gradcheck") return gradcheck();
    if (sub == "report") return report();
    throw ConfigError("unknown subcommand: " + sub);
  }

  // -------------------------------------------------------------------------
  int simulate() {
    const fs::path dir = out_ / "corpus";
    build_corpus(cfg_.corpus, dir);
    const Corpus corpus = load_corpus(dir);
    nlohmann::ordered_json m;
    for (Split s : {Split::kTrain, Split::kDev, Split::kEval}) {
      const auto items = corpus.split(s);
      Real snr = 0.0;
      for (const auto *it : items) snr += it->snr_db / static_cast<Real>(items.size());
      m["n_" + to_string(s)] = items.size();
      m["mean_snr_db_" + to_string(s)] = snr;
    }
    write_summary("simulate", dir, m);
    say("simulate: wrote " + std::to_string(corpus.items.size()) + " items to " + dir.string());
    return 0;
  }

  int pretrain() {
    const Corpus &corpus = this->corpus();
    const EncoderParams &enc = encoder();
    const fs::path dir = stage_dir("pretrain");
    const auto train = make_pairs(corpus.split(Split::kTrain)), dev = make_pairs(corpus.split(Split::kDev));
    say("pretrain: " + std::to_string(cfg_.train.max_epochs_pretrain) + " epochs on " +
        std::to_string(train.size()) + " utterances");
    const StageResult res =
        pretrain_se(train, dev, init_se_model(cfg_.se, cfg_.train.seed), cfg_.train, dir / "se.ckpt", &enc);
    write_stage_logs(dir, res);
    nlohmann::ordered_json m = stage_metrics(res);
    m["dev_si_sdr_noisy"] = noisy_si_sdr(dev);
    write_summary("pretrain", dir, m);
    return 0;
  }

  int finetune() {
    const Corpus &corpus = this->corpus();
    const EncoderParams &enc = encoder();
    const SEParams pre = require_se(out_ / "pretrain" / "se.ckpt", "pretrain");
    const fs::path dir = stage_dir("finetune");
    const StageResult res = run_finetune(corpus, enc, pre, cfg_.loss, dir);
    nlohmann::ordered_json m = stage_metrics(res);
    m["alpha"] = cfg_.loss.alpha;
    m["scheme"] = to_string(cfg_.loss.scheme);
    write_summary("finetune", dir, m);
    return 0;
  }

  int train_probe_cmd() {
    probes(true);
    const fs::path dir = out_ / "probe";
    std::ostringstream csv;
    csv << kProbeResultsHeader << "\n";
    nlohmann::ordered_json m;
    for (const auto &[mode, params] : probes_) {
      for (ProbeInput in : {ProbeInput::kClean, ProbeInput::kNoisy}) {
        const Real acc = eval_probe(probe_items(Split::kDev, nullptr, "none", in), params);
        csv << "none," << mode << ",dev," << input_name(in) << "," << format_metric(acc) << "\n";
        m[mode + "_dev_" + input_name(in)] = acc;
      }
    }
    write_file_atomic(dir / "probe_results.csv", csv.str());
    write_summary("train-probe", dir, m);
    return 0;
  }

  int evaluate() {
    const Corpus &corpus = this->corpus();
    const EncoderParams &enc = encoder();
    std::vector<std::pair<std::string, SEParams>> fronts;
    fronts.emplace_back("snr-only", require_se(out_ / "pretrain" / "se.ckpt", "pretrain"));
    std::string ft_alpha = "", ft_scheme = "";
    if (fs::exists(out_ / "finetune" / "se.ckpt")) {
      const Checkpoint ck = load_checkpoint(out_ / "finetune" / "se.ckpt");
      ft_alpha = format_real(required_scalar(ck, "loss.alpha"));
      ft_scheme = to_string(static_cast<LayerScheme>(static_cast<int>(required_scalar(ck, "loss.scheme"))));
      fronts.emplace_back("ssl-mse", se_from_checkpoint(ck));
    }
    probes(true);
    const fs::path dir = stage_dir("evaluate");
    std::ostringstream metrics, pcsv;
    metrics << kMetricsHeader << "\n";
    pcsv << kProbeResultsHeader << "\n";
    nlohmann::ordered_json m;
    for (Split split : {Split::kDev, Split::kEval}) {
      const auto pairs = make_pairs(corpus.split(split));
      for (int f = -1; f < static_cast<int>(fronts.size()); ++f) {
        const SEParams *se = f < 0 ? nullptr : &fronts[static_cast<std::size_t>(f)].second;
        const std::string tag = f < 0 ? "none" : fronts[static_cast<std::size_t>(f)].first;
        const bool is_ft = tag == "ssl-mse";
        const auto [sdr, mse] = enhancement_metrics(se, pairs, enc);
        Real acc[2] = {0.0, 0.0};
        for (const auto &[mode, params] : probes_) {
          for (ProbeInput in : {ProbeInput::kNoisy, ProbeInput::kClean}) {
            const Real a = eval_probe(probe_items(split, se, tag, in), params);
            pcsv << tag << "," << mode << "," << to_string(split) << "," << input_name(in) << ","
                 << format_metric(a) << "\n";
            if (mode == "official") acc[in == ProbeInput::kClean] = a;
          }
        }
        metrics << tag << "," << (is_ft ? ft_alpha : "") << "," << (is_ft ? ft_scheme : "") << ","
                << to_string(split) << "," << format_metric(sdr) << "," << format_metric(mse) << ","
                << format_metric(acc[0]) << "," << format_metric(acc[1]) << "\n";
        const std::string key = tag + "_" + to_string(split);
        m[key + "_si_sdr"] = sdr;
        m[key + "_ssl_mse_last"] = mse;
        m[key + "_probe_acc_noisy"] = acc[0];
        m[key + "_probe_acc_clean"] = acc[1];
      }
    }
    write_file_atomic(dir / "metrics.csv", metrics.str());
    write_file_atomic(dir / "probe_results.csv", pcsv.str());
    write_summary("evaluate", dir, m);
    return 0;
  }

  int sweep_alpha() {
    if (cfg_.sweep_alphas.empty()) throw ConfigError("sweep-alpha: empty alpha list");
    const Corpus &corpus = this->corpus();
    const EncoderParams &enc = encoder();
    const SEParams pre = require_se(out_ / "pretrain" / "se.ckpt", "pretrain");
    probes(true);
    const DownstreamParams &official = probes_.at("official");
    const fs::path dir = stage_dir("sweep");
    const auto dev = make_pairs(corpus.split(Split::kDev));
    std::ostringstream csv, plot;
    csv << kSweepHeader << "\n";
    plot << kPlotDataHeader << "\n";
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    Real min_positive = 0.0;
    for (Real a : cfg_.sweep_alphas)
      if (a > 0.0 && (min_positive == 0.0 || a < min_positive)) min_positive = a;
    for (Real alpha : cfg_.sweep_alphas) {
      LossConfig loss = cfg_.loss;
      loss.alpha = alpha;
      const fs::path sub = dir / ("alpha_" + format_real(alpha));
      fs::create_directories(sub);
      say("sweep-alpha: alpha=" + format_real(alpha));
      const StageResult res = run_finetune(corpus, enc, pre, loss, sub);
      const auto [sdr, mse] = enhancement_metrics(&res.best, dev, enc);
      const std::string tag = "sweep:" + format_real(alpha);
      const Real noisy = eval_probe(probe_items(Split::kDev, &res.best, tag, ProbeInput::kNoisy), official);
      const Real clean = eval_probe(probe_items(Split::kDev, &res.best, tag, ProbeInput::kClean), official);
      csv << format_real(alpha) << "," << format_metric(sdr) << "," << format_metric(mse) << ","
          << format_metric(noisy) << "," << format_metric(clean) << "\n";
      const Real axis = alpha > 0.0 ? std::log10(alpha) : (min_positive > 0.0 ? std::log10(min_positive) - 1.0 : 0.0);
      plot << format_real(alpha) << "," << format_metric(axis) << ",dev_si_sdr," << format_metric(sdr) << "\n";
      plot << format_real(alpha) << "," << format_metric(axis) << ",dev_ssl_mse_last," << format_metric(mse) << "\n";
      rows.push_back({{"alpha", alpha}, {"dev_si_sdr", sdr}, {"dev_ssl_mse_last", mse},
                      {"probe_acc_noisy", noisy}, {"probe_acc_clean", clean}});
    }
    write_file_atomic(dir / "sweep.csv", csv.str());
    write_file_atomic(dir / "plot_data.csv", plot.str());
    write_summary("sweep-alpha", dir, {{"rows", rows}});
    return 0;
  }

  int gradcheck() {
    const fs::path dir = stage_dir("gradcheck");
    std::ostringstream csv;
    csv << kGradCheckHeader << "\n";
    nlohmann::ordered_json m;
    bool all_pass = true;
    Real worst = 0.0;
    for (LayerScheme scheme : {LayerScheme::kLast, LayerScheme::kAll, LayerScheme::kLatterHalf}) {
      for (Real alpha : {0.0, 0.1, 1.0}) {
        LossConfig loss;
        loss.alpha = alpha;
        loss.scheme = scheme;
        const GradCheckReport r = grad_check(GradCheckSetup{}, loss, cfg_.train.seed);
        const bool pass = r.max_rel_error < kGradCheckTolerance;
        all_pass = all_pass && pass;
        worst = std::max(worst, r.max_rel_error);
        csv << to_string(scheme) << "," << format_real(alpha) << "," << format_metric(r.max_rel_error) << ","
            << r.parameters << "," << (pass ? "true" : "false") << "\n";
        say("gradcheck: " + to_string(scheme) + " alpha=" + format_real(alpha) +
            " max_rel_error=" + format_metric(r.max_rel_error));
      }
    }
    write_file_atomic(dir / "gradcheck.csv", csv.str());
    m["max_rel_error"] = worst;
    m["pass"] = all_pass;
    write_summary("gradcheck", dir, m);
    return all_pass ? 0 : 1;
  }

  int report() {
    const fs::path metrics = out_ / "evaluate" / "metrics.csv", sweep = out_ / "sweep" / "sweep.csv";
    const bool have_metrics = fs::exists(metrics), have_sweep = fs::exists(sweep);
    if (!have_metrics && !have_sweep)
      throw MissingPrerequisite("report: no runs found under " + out_.string() + " (run evaluate or sweep-alpha)");
    struct Row {
      std::string frontend, alpha, scheme, split, si_sdr, ssl_mse, acc_noisy, acc_clean, source;
    };
    std::vector<Row> rows;
    if (have_metrics) {
      const auto table = read_csv(metrics, kMetricsHeader);
      // no-SE, then the SNR-only baseline, then SSL-MSE fine-tuned models.
      for (const char *front : {"none", "snr-only", "ssl-mse"})
        for (std::size_t i = 0; i < table.size(); ++i)
          if (table[i][0] == front)
            rows.push_back({table[i][0], table[i][1], table[i][2], table[i][3], table[i][4], table[i][5],
                            table[i][6], table[i][7], "evaluate/metrics.csv:" + std::to_string(i + 2)});
    }
    if (have_sweep) {
      const auto table = read_csv(sweep, kSweepHeader);
      for (std::size_t i = 0; i < table.size(); ++i)
        rows.push_back({"ssl-mse", table[i][0], to_string(cfg_.loss.scheme), "dev", table[i][1], table[i][2],
                        table[i][3], table[i][4], "sweep/sweep.csv:" + std::to_string(i + 2)});
    }
    const fs::path dir = stage_dir("report");
    std::ostringstream csv, txt;
    csv << kReportHeader << "\n";
    txt << std::left << std::setw(5) << "row" << std::setw(10) << "frontend" << std::setw(8) << "alpha"
        << std::setw(12) << "scheme" << std::setw(6) << "split" << std::setw(12) << "si_sdr" << std::setw(14)
        << "ssl_mse_last" << std::setw(10) << "acc_noisy" << std::setw(10) << "acc_clean"
        << "source\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Row &r = rows[i];
      csv << i + 1 << "," << r.frontend << "," << r.alpha << "," << r.scheme << "," << r.split << "," << r.si_sdr
          << "," << r.ssl_mse << "," << r.acc_noisy << "," << r.acc_clean << "," << r.source << "\n";
      txt << std::left << std::setw(5) << i + 1 << std::setw(10) << r.frontend << std::setw(8)
          << (r.alpha.empty() ? "-" : r.alpha) << std::setw(12) << (r.scheme.empty() ? "-" : r.scheme)
          << std::setw(6) << r.split << std::setw(12) << short_metric(r.si_sdr) << std::setw(14)
          << short_metric(r.ssl_mse) << std::setw(10) << short_metric(r.acc_noisy) << std::setw(10)
          << short_metric(r.acc_clean) << r.source << "\n";
    }
    write_file_atomic(dir / "report.csv", csv.str());
    write_file_atomic(dir / "report.txt", txt.str());
    say(txt.str());
    write_summary("report", dir, {{"rows", rows.size()}});
    return 0;
  }

  // -------------------------------------------------------------------------
  // Shared pieces, public for the acceptance suite.

  const Corpus &corpus() {
    if (!corpus_) {
      const fs::path dir = out_ / "corpus";
      if (!fs::exists(dir / "manifest.csv"))
        throw MissingPrerequisite("missing corpus in " + dir.string() + " (run simulate first)");
      corpus_ = load_corpus(dir);
    }
    return *corpus_;
  }

  /// The frozen encoder: loaded from encoder.checkpoint if configured,
  /// otherwise initialised from the encoder keys. Written to
  /// <out>/encoder.ckpt on first use.
  const EncoderParams &encoder() {
    if (!encoder_) {
      if (!cfg_.encoder_checkpoint.empty()) {
        if (!fs::exists(cfg_.encoder_checkpoint))
          throw MissingPrerequisite("encoder checkpoint not found: " + cfg_.encoder_checkpoint);
        encoder_ = encoder_from_checkpoint(load_checkpoint(cfg_.encoder_checkpoint));
        if (encoder_->config.hop != cfg_.corpus.hop)
          throw ConfigError("encoder checkpoint hop " + std::to_string(encoder_->config.hop) +
                            " does not match corpus.hop " + std::to_string(cfg_.corpus.hop));
      } else {
        encoder_ = init_frozen_encoder(cfg_.encoder);
      }
      fs::create_directories(out_);
      save_checkpoint(out_ / "encoder.ckpt", to_checkpoint(*encoder_));
    }
    return *encoder_;
  }

  /// Official (clean-trained) and noise-robust (noisy-trained) probes on the
  /// unprocessed training split. Loaded from <out>/probe if present; trained
  /// and saved otherwise.
  const std::map<std::string, DownstreamParams> &probes(bool train_if_missing) {
    if (!probes_.empty()) return probes_;
    const fs::path dir = out_ / "probe";
    const bool have = fs::exists(dir / "official.ckpt") && fs::exists(dir / "noise_robust.ckpt");
    if (have) {
      for (const char *mode : {"official", "noise_robust"})
        probes_[mode] = downstream_from_checkpoint(load_checkpoint(dir / (std::string(mode) + ".ckpt")));
      return probes_;
    }
    if (!train_if_missing) throw MissingPrerequisite("missing probe checkpoints in " + dir.string());
    fs::create_directories(dir);
    for (const auto &[mode, input] : {std::pair{"official", ProbeInput::kClean}, std::pair{"noise_robust", ProbeInput::kNoisy}}) {
      say(std::string("train-probe: ") + mode);
      const ProbeResult r = train_probe(probe_items(Split::kTrain, nullptr, "none", input),
                                        probe_items(Split::kDev, nullptr, "none", input), cfg_.corpus.n_tokens,
                                        cfg_.train.seed, cfg_.probe);
      save_checkpoint(dir / (std::string(mode) + ".ckpt"), to_checkpoint(r.params));
      probes_[mode] = r.params;
    }
    return probes_;
  }

  /// Mean SI-SDR and last-layer SSL-MSE of SE output (or the raw mixture).
  std::pair<Real, Real> enhancement_metrics(const SEParams *se, const std::vector<TrainPair> &pairs,
                                            const EncoderParams &enc) {
    const LayerWeights last = make_layer_weights(LayerScheme::kLast, enc.config.n_layers);
    Real sdr = 0.0, mse = 0.0;
    const Real scale = 1.0 / static_cast<Real>(pairs.size());
    for (const auto &p : pairs) {
      const Vector y = se ? enhance(*se, p.noisy) : p.noisy;
      sdr += scale * si_sdr(y, p.clean);
      mse += scale * ssl_mse(encode(enc, y), p.clean_stack(enc), last);
    }
    return {sdr, mse};
  }

 private:
  void say(const std::string &s) const {
    if (log_) *log_ << s << std::endl;
  }

  static std::string input_name(ProbeInput in) { return in == ProbeInput::kClean ? "clean" : "noisy"; }

  static std::string short_metric(const std::string &v) {
    if (v.empty()) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", std::stod(v));
    return buf;
  }

  fs::path stage_dir(const std::string &name) {
    const fs::path dir = out_ / name;
    fs::create_directories(dir);
    return dir;
  }

  static Real noisy_si_sdr(const std::vector<TrainPair> &pairs) {
    Real s = 0.0;
    for (const auto &p : pairs) s += si_sdr(p.noisy, p.clean) / static_cast<Real>(pairs.size());
    return s;
  }

  SEParams require_se(const fs::path &path, const std::string &stage) {
    if (!fs::exists(path))
      throw MissingPrerequisite("missing " + path.string() + " (run " + stage + " first)");
    return se_from_checkpoint(load_checkpoint(path));
  }

  StageResult run_finetune(const Corpus &corpus, const EncoderParams &enc, const SEParams &pre,
                           const LossConfig &loss, const fs::path &dir) {
    if (corpus.items.front().mixture.size() < enc.config.frontend_kernel)
      throw ShapeError("finetune: corpus utterances are shorter than the encoder kernel");
    const auto train = make_pairs(corpus.split(Split::kTrain)), dev = make_pairs(corpus.split(Split::kDev));
    say("finetune: alpha=" + format_real(loss.alpha) + " scheme=" + to_string(loss.scheme));
    StageResult res = finetune_sslmse(train, dev, pre, enc, loss, cfg_.train);
    Checkpoint ck = to_checkpoint(res.best);
    ck.set_scalar("state.epoch", res.best_epoch);
    ck.set_scalar("state.best_dev_loss", res.best_dev_loss);
    ck.set_scalar("state.lr", res.lr_trace[static_cast<std::size_t>(res.best_epoch - 1)]);
    ck.set_scalar("loss.alpha", loss.alpha);
    ck.set_scalar("loss.scheme", static_cast<double>(static_cast<int>(loss.scheme)));
    save_checkpoint(dir / "se.ckpt", ck);
    write_stage_logs(dir, res);
    return res;
  }

  static void write_stage_logs(const fs::path &dir, const StageResult &res) {
    write_file_atomic(dir / "train_log.csv", train_log_csv(res.log));
    write_file_atomic(dir / "loss_log.csv", loss_log_csv(res.loss_log));
  }

  static nlohmann::ordered_json stage_metrics(const StageResult &res) {
    const TrainLogRow &best = res.log[static_cast<std::size_t>(res.best_epoch - 1)];
    return {{"best_epoch", res.best_epoch},
            {"best_dev_loss", res.best_dev_loss},
            {"dev_si_sdr", best.dev_si_sdr},
            {"dev_ssl_mse_last", best.dev_ssl_mse},
            {"final_lr", res.lr_trace.back()},
            {"encoder_sha256_before", res.encoder_sha_before},
            {"encoder_sha256_after", res.encoder_sha_after}};
  }

  /// Probe inputs, cached per (split, frontend tag, input).
  const std::vector<ProbeItem> &probe_items(Split split, const SEParams *se, const std::string &tag, ProbeInput in) {
    const std::string key = to_string(split) + "|" + tag + "|" + input_name(in);
    auto it = probe_cache_.find(key);
    if (it == probe_cache_.end())
      it = probe_cache_.emplace(key, extract_probe_items(corpus().split(split), encoder(), se, in)).first;
    return it->second;
  }

  static std::vector<std::vector<std::string>> read_csv(const fs::path &path, const std::string &header) {
    std::istringstream in(read_file_bytes(path));
    std::string line;
    if (!std::getline(in, line) || line != header) throw FormatError("unexpected header in " + path.string());
    std::vector<std::vector<std::string>> rows;
    const std::size_t n = split_csv_line(header).size();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto cells = split_csv_line(line);
      if (cells.size() != n) throw FormatError("malformed row in " + path.string() + ": " + line);
      rows.push_back(std::move(cells));
    }
    return rows;
  }

  void write_summary(const std::string &sub, const fs::path &dir, const nlohmann::ordered_json &metrics) const {
    nlohmann::ordered_json j;
    j["subcommand"] = sub;
    j["config_hash"] = config_hash(cfg_);
    j["git_describe"] = git_describe();
    nlohmann::ordered_json c;
    for (const auto &key : config_keys()) c[key] = get_config_value(cfg_, key);
    j["config"] = c;
    j["metrics"] = metrics;
    write_file_atomic(dir / "summary.json", j.dump(2) + "\n");
  }

  ExperimentConfig cfg_;
  std::ostream *log_ = nullptr;
  fs::path out_;
  std::optional<Corpus> corpus_;
  std::optional<EncoderParams> encoder_;
  std::map<std::string, DownstreamParams> probes_;
  std::map<std::string, std::vector<ProbeItem>> probe_cache_;
};

/// Enhances one WAV file with an SE checkpoint.
inline void enhance_file(const fs::path &in, const fs::path &out, const fs::path &ckpt) {
  if (!fs::exists(ckpt)) throw MissingPrerequisite("missing checkpoint " + ckpt.string());
  const SEParams se = se_from_checkpoint(load_checkpoint(ckpt));
  const Waveform x = read_wav(in);
  Waveform y;
  y.sample_rate = x.sample_rate;
  y.samples = enhance(se, x.samples);
  write_wav(out, y);
}

}  // namespace sslmse

#endif  // SSLMSE_EXPERIMENT_HPP_
