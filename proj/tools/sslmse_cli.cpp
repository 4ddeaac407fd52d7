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

// Command-line driver: sslmse <subcommand> [--config PATH] [--set key=value]...
//                              [--out DIR] [--seed N]

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sslmse/experiment.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App *app, CommonOptions &o) {
  app->add_option("--config", o.config_path, "Experiment config file")->check(CLI::ExistingFile);
  app->add_option("--set", o.overrides, "Override a config value, e.g. loss.alpha=0.01 (repeatable)");
  app->add_option("--out", o.out, "Output directory (overrides output.dir)");
  app->add_option("--seed", o.seed, "Seed for corpus, encoder, training and probe");
}

sslmse::ExperimentConfig resolve(const CommonOptions &o) {
  sslmse::ExperimentConfig cfg = o.config_path.empty() ? sslmse::ExperimentConfig{} : sslmse::load_config(o.config_path);
  if (o.seed) cfg.set_seed(*o.seed);
  for (const auto &kv : o.overrides) sslmse::apply_override(cfg, kv);
  if (!o.out.empty()) cfg.output_dir = o.out;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Speech-enhancement training with a frozen-encoder feature loss"};
  app.require_subcommand(1);
  CommonOptions common;
  std::vector<std::pair<std::string, CLI::App *>> subs;
  const std::map<std::string, std::string> help = {
      {"simulate", "Build the synthetic corpus"},
      {"pretrain", "Pretrain the enhancer with the SNR loss"},
      {"finetune", "Fine-tune with SSL-MSE + alpha * SNR"},
      {"train-probe", "Train the frame-classification probes"},
      {"evaluate", "Evaluate all available front-ends"},
      {"sweep-alpha", "Fine-tune and evaluate for every alpha in sweep.alphas"},
      {"gradcheck", "Compare analytic and finite-difference gradients"},
      {"report", "Aggregate results into one table"}};
  for (const auto &name : sslmse::subcommands()) {
    CLI::App *sub = app.add_subcommand(name, help.at(name));
    add_common(sub, common);
    subs.emplace_back(name, sub);
  }
  std::string wav_in, wav_out, ckpt;
  CLI::App *enh = app.add_subcommand("enhance", "Enhance one WAV file with an SE checkpoint");
  enh->add_option("--in", wav_in, "Input WAV")->required()->check(CLI::ExistingFile);
  enh->add_option("--output", wav_out, "Output WAV")->required();
  enh->add_option("--ckpt", ckpt, "SE checkpoint")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (enh->parsed()) {
      sslmse::enhance_file(wav_in, wav_out, ckpt);
      return 0;
    }
    for (const auto &[name, sub] : subs) {
      if (!sub->parsed()) continue;
      sslmse::Experiment exp(resolve(common), &std::cerr);
      return exp.run(name);
    }
  } catch (const sslmse::ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
