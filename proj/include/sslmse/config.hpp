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

#ifndef SSLMSE_CONFIG_HPP_
#define SSLMSE_CONFIG_HPP_

// Experiment configuration: a plain-text file of `key = value` lines grouped
// under `[section]` headers, plus dotted `section.key=value` overrides.
//
//   # comment
//   [loss]
//   alpha = 0.1
//   scheme = last
//
// Every key is registered below; anything else is rejected by name.

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "sslmse/checkpoint.hpp"
#include "sslmse/datasim.hpp"
#include "sslmse/downstream.hpp"
#include "sslmse/losses.hpp"
#include "sslmse/semodel.hpp"
#include "sslmse/sslenc.hpp"
#include "sslmse/training.hpp"

namespace sslmse {

struct ExperimentConfig {
  CorpusConfig corpus;
  EncoderConfig encoder;
  SEConfig se;
  LossConfig loss;
  TrainConfig train;
  ProbeOptions probe;
  std::vector<Real> sweep_alphas{0.0, 1e-4, 1e-3, 1e-2, 0.1, 1.0};
  std::string encoder_checkpoint;  // empty: initialise from encoder.* keys
  std::string output_dir = "runs/default";

  /// Sets every seed (corpus, encoder, training, probe) to `seed`.
  void set_seed(std::uint64_t seed) {
    corpus.master_seed = seed;
    encoder.seed = seed;
    train.seed = seed;
  }

  void validate() const {
    corpus.validate();
    encoder.validate();
    se.validate();
    train.validate();
    if (encoder.hop != corpus.hop) throw ConfigError("encoder.hop must equal corpus.hop");
    if (loss.alpha < 0.0 || !std::isfinite(loss.alpha)) throw ConfigError("loss.alpha must be finite and >= 0");
    if (!(loss.eps > 0.0)) throw ConfigError("loss.eps must be > 0");
    if (probe.epochs < 1 || probe.batch_size < 1 || !(probe.lr > 0.0))
      throw ConfigError("probe: epochs, batch_size and lr must be positive");
    if (sweep_alphas.empty()) throw ConfigError("sweep.alphas must not be empty");
    for (Real a : sweep_alphas)
      if (a < 0.0 || !std::isfinite(a)) throw ConfigError("sweep.alphas entries must be finite and >= 0");
    if (output_dir.empty()) throw ConfigError("output.dir must not be empty");
  }
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class Int>
Int parse_int(const std::string &key, const std::string &v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
    throw ConfigError("invalid integer for " + key + ": '" + v + "'");
  return out;
}

inline Real parse_real(const std::string &key, const std::string &v) {
  char *end = nullptr;
  const Real out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(out))
    throw ConfigError("invalid number for " + key + ": '" + v + "'");
  return out;
}

inline std::vector<Real> parse_real_list(const std::string &key, const std::string &v) {
  std::vector<Real> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(key, trim(item)));
  return out;
}

struct Field {
  std::string key;
  std::function<std::string(const ExperimentConfig &)> get;
  std::function<void(ExperimentConfig &, const std::string &)> set;
};

template <class Get>
Field int_field(const std::string &key, Get member) {
  using Int = std::remove_reference_t<decltype(member(std::declval<ExperimentConfig &>()))>;
  return {key, [member](const ExperimentConfig &c) { return std::to_string(member(const_cast<ExperimentConfig &>(c))); },
          [member, key](ExperimentConfig &c, const std::string &v) { member(c) = parse_int<Int>(key, v); }};
}

template <class Get>
Field real_field(const std::string &key, Get member) {
  return {key, [member](const ExperimentConfig &c) { return format_real(member(const_cast<ExperimentConfig &>(c))); },
          [member, key](ExperimentConfig &c, const std::string &v) { member(c) = parse_real(key, v); }};
}

template <class Get>
Field string_field(const std::string &key, Get member) {
  return {key, [member](const ExperimentConfig &c) { return member(const_cast<ExperimentConfig &>(c)); },
          [member](ExperimentConfig &c, const std::string &v) { member(c) = v; }};
}

inline const std::vector<Field> &fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = {
      int_field("corpus.n_train", [](C &c) -> int & { return c.corpus.n_train; }),
      int_field("corpus.n_dev", [](C &c) -> int & { return c.corpus.n_dev; }),
      int_field("corpus.n_eval", [](C &c) -> int & { return c.corpus.n_eval; }),
      real_field("corpus.duration_s", [](C &c) -> Real & { return c.corpus.duration_s; }),
      real_field("corpus.snr_train_lo", [](C &c) -> Real & { return c.corpus.snr_range_train.lo; }),
      real_field("corpus.snr_train_hi", [](C &c) -> Real & { return c.corpus.snr_range_train.hi; }),
      real_field("corpus.snr_eval_lo", [](C &c) -> Real & { return c.corpus.snr_range_eval.lo; }),
      real_field("corpus.snr_eval_hi", [](C &c) -> Real & { return c.corpus.snr_range_eval.hi; }),
      int_field("corpus.master_seed", [](C &c) -> std::uint64_t & { return c.corpus.master_seed; }),
      int_field("corpus.n_tokens", [](C &c) -> int & { return c.corpus.n_tokens; }),
      int_field("corpus.sample_rate", [](C &c) -> int & { return c.corpus.sample_rate; }),
      int_field("corpus.hop", [](C &c) -> int & { return c.corpus.hop; }),
      int_field("encoder.n_layers", [](C &c) -> int & { return c.encoder.n_layers; }),
      int_field("encoder.dim", [](C &c) -> int & { return c.encoder.dim; }),
      int_field("encoder.hop", [](C &c) -> int & { return c.encoder.hop; }),
      int_field("encoder.frontend_kernel", [](C &c) -> int & { return c.encoder.frontend_kernel; }),
      int_field("encoder.seed", [](C &c) -> std::uint64_t & { return c.encoder.seed; }),
      int_field("encoder.frontend_stride", [](C &c) -> int & { return c.encoder.frontend_stride; }),
      int_field("encoder.frontend_channels", [](C &c) -> int & { return c.encoder.frontend_channels; }),
      int_field("encoder.frontend_filter", [](C &c) -> int & { return c.encoder.frontend_filter; }),
      string_field("encoder.checkpoint", [](C &c) -> std::string & { return c.encoder_checkpoint; }),
      int_field("se.basis", [](C &c) -> int & { return c.se.basis; }),
      int_field("se.window", [](C &c) -> int & { return c.se.window; }),
      int_field("se.bottleneck", [](C &c) -> int & { return c.se.bottleneck; }),
      int_field("se.repeats", [](C &c) -> int & { return c.se.repeats; }),
      int_field("se.blocks", [](C &c) -> int & { return c.se.blocks; }),
      int_field("se.hidden", [](C &c) -> int & { return c.se.hidden; }),
      int_field("se.kernel", [](C &c) -> int & { return c.se.kernel; }),
      real_field("loss.alpha", [](C &c) -> Real & { return c.loss.alpha; }),
      {"loss.scheme", [](const C &c) { return std::string(to_string(c.loss.scheme)); },
       [](C &c, const std::string &v) {
         try {
           c.loss.scheme = parse_layer_scheme(v);
         } catch (const Error &) {
           throw ConfigError("invalid value for loss.scheme: '" + v + "'");
         }
       }},
      real_field("loss.eps", [](C &c) -> Real & { return c.loss.eps; }),
      real_field("train.lr_pretrain", [](C &c) -> Real & { return c.train.lr_pretrain; }),
      real_field("train.lr_finetune", [](C &c) -> Real & { return c.train.lr_finetune; }),
      real_field("train.plateau_factor", [](C &c) -> Real & { return c.train.plateau_factor; }),
      int_field("train.plateau_patience", [](C &c) -> int & { return c.train.plateau_patience; }),
      int_field("train.max_epochs_pretrain", [](C &c) -> int & { return c.train.max_epochs_pretrain; }),
      int_field("train.max_epochs_finetune", [](C &c) -> int & { return c.train.max_epochs_finetune; }),
      int_field("train.batch_size", [](C &c) -> int & { return c.train.batch_size; }),
      real_field("train.clip_norm", [](C &c) -> Real & { return c.train.clip_norm; }),
      int_field("train.seed", [](C &c) -> std::uint64_t & { return c.train.seed; }),
      int_field("probe.epochs", [](C &c) -> int & { return c.probe.epochs; }),
      real_field("probe.lr", [](C &c) -> Real & { return c.probe.lr; }),
      int_field("probe.batch_size", [](C &c) -> int & { return c.probe.batch_size; }),
      {"sweep.alphas",
       [](const C &c) {
         std::string s;
         for (std::size_t i = 0; i < c.sweep_alphas.size(); ++i) s += (i ? "," : "") + format_real(c.sweep_alphas[i]);
         return s;
       },
       [](C &c, const std::string &v) { c.sweep_alphas = parse_real_list("sweep.alphas", v); }},
      string_field("output.dir", [](C &c) -> std::string & { return c.output_dir; }),
  };
  return table;
}

inline const Field &find_field(const std::string &key) {
  for (const auto &f : fields())
    if (f.key == key) return f;
  throw ConfigError("unknown config key: " + key);
}

}  // namespace config_detail

inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto &f : config_detail::fields()) keys.push_back(f.key);
  return keys;
}

/// Sets one dotted key. Throws ConfigError naming the key if it is unknown.
inline void set_config_value(ExperimentConfig &cfg, const std::string &key, const std::string &value) {
  config_detail::find_field(key).set(cfg, config_detail::trim(value));
}

inline std::string get_config_value(const ExperimentConfig &cfg, const std::string &key) {
  return config_detail::find_field(key).get(cfg);
}

/// Applies a `key=value` override.
inline void apply_override(ExperimentConfig &cfg, const std::string &assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override must be key=value: '" + assignment + "'");
  set_config_value(cfg, config_detail::trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

/// Parses config text on top of `cfg`. Keys inside `[section]` are prefixed
/// with `section.`; keys before any section must already be dotted.
inline void parse_config_text(ExperimentConfig &cfg, const std::string &text) {
  std::istringstream in(text);
  std::string raw, section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = config_detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3)
        throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
      section = config_detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = config_detail::trim(line.substr(0, eq));
    set_config_value(cfg, section.empty() ? key : section + "." + key, line.substr(eq + 1));
  }
}

inline ExperimentConfig load_config(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig cfg;
  parse_config_text(cfg, ss.str());
  return cfg;
}

/// Every key with its current value, one `key=value` line each, in
/// registry order.
inline std::string canonical_config(const ExperimentConfig &cfg) {
  std::string out;
  for (const auto &f : config_detail::fields()) out += f.key + "=" + f.get(cfg) + "\n";
  return out;
}

inline std::string config_hash(const ExperimentConfig &cfg) {
  return sha256_hex(canonical_config(cfg));
}

}  // namespace sslmse

#endif  // SSLMSE_CONFIG_HPP_
