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

#include <gtest/gtest.h>

#include "sslmse/config.hpp"

namespace sslmse {
namespace {

TEST(Config, DefaultsValidate) {
  ExperimentConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.loss.alpha, 0.1);
  EXPECT_EQ(cfg.sweep_alphas.size(), 6u);
}

TEST(Config, SectionsAndComments) {
  ExperimentConfig cfg;
  parse_config_text(cfg,
                    "# comment\n"
                    "[corpus]\n"
                    "n_train = 12   # trailing\n"
                    "\n"
                    "[loss]\n"
                    "alpha = 0.25\n"
                    "scheme = last\n"
                    "[sweep]\n"
                    "alphas = 0, 0.5, 2\n");
  EXPECT_EQ(cfg.corpus.n_train, 12);
  EXPECT_EQ(cfg.loss.alpha, 0.25);
  EXPECT_EQ(cfg.loss.scheme, LayerScheme::kLast);
  EXPECT_EQ(cfg.sweep_alphas, (std::vector<Real>{0.0, 0.5, 2.0}));
}

TEST(Config, UnknownKeyIsNamed) {
  ExperimentConfig cfg;
  try {
    parse_config_text(cfg, "[loss]\nalhpa = 0.1\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError &e) {
    EXPECT_NE(std::string(e.what()).find("loss.alhpa"), std::string::npos) << e.what();
  }
}

TEST(Config, MalformedInputIsRejected) {
  ExperimentConfig cfg;
  EXPECT_THROW(parse_config_text(cfg, "[loss\n"), ConfigError);
  EXPECT_THROW(parse_config_text(cfg, "loss.alpha 0.1\n"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "loss.alpha=abc"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "train.batch_size=2.5"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "loss.scheme=middle"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "novalue"), ConfigError);
}

TEST(Config, OverrideWinsOverFile) {
  ExperimentConfig cfg;
  parse_config_text(cfg, "[loss]\nalpha = 0.25\n");
  apply_override(cfg, "loss.alpha=0.5");
  EXPECT_EQ(get_config_value(cfg, "loss.alpha"), "0.5");
}

TEST(Config, HashTracksValues) {
  ExperimentConfig a, b;
  EXPECT_EQ(config_hash(a), config_hash(b));
  apply_override(b, "loss.alpha=0.1");
  EXPECT_EQ(config_hash(a), config_hash(b));
  apply_override(b, "loss.alpha=0.2");
  EXPECT_NE(config_hash(a), config_hash(b));
  apply_override(b, "loss.alpha=0.1");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 64u);
}

TEST(Config, CanonicalTextRoundtrips) {
  ExperimentConfig a;
  apply_override(a, "corpus.n_train=7");
  apply_override(a, "sweep.alphas=0,0.3");
  ExperimentConfig b;
  parse_config_text(b, canonical_config(a));
  EXPECT_EQ(canonical_config(a), canonical_config(b));
}

TEST(Config, SeedSetsEverySeed) {
  ExperimentConfig cfg;
  cfg.set_seed(42);
  EXPECT_EQ(cfg.corpus.master_seed, 42u);
  EXPECT_EQ(cfg.encoder.seed, 42u);
  EXPECT_EQ(cfg.train.seed, 42u);
}

TEST(Config, ValidationRejectsBadValues) {
  ExperimentConfig cfg;
  apply_override(cfg, "loss.alpha=-1");
  EXPECT_THROW(cfg.validate(), Error);
  ExperimentConfig c2;
  apply_override(c2, "train.batch_size=0");
  EXPECT_THROW(c2.validate(), Error);
}

}  // namespace
}  // namespace sslmse
