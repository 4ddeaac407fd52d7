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

#include "sslmse/checkpoint.hpp"
#include "sslmse/downstream.hpp"
#include "test_util.hpp"

namespace sslmse {
namespace {

using testing::random_matrix;

FeatureStack stack_of(std::vector<Matrix> layers) {
  FeatureStack s;
  s.layers = std::move(layers);
  s.hop = 80;
  return s;
}

TEST(WeightedFeatures, OneHotSelectsLayer) {
  const FeatureStack s = stack_of({random_matrix(4, 6, 1), random_matrix(4, 6, 2), random_matrix(4, 6, 3)});
  TaskWeights tw{Matrix::Zero(3, 1)};
  tw.logits(1, 0) = 1000.0;
  EXPECT_EQ(weighted_features(s, tw), s.layers[1]);
}

TEST(WeightedFeatures, UniformOnIdenticalLayers) {
  const Matrix m = random_matrix(4, 6, 4);
  const FeatureStack s = stack_of({m, m, m, m});
  EXPECT_LT((weighted_features(s, TaskWeights{Matrix::Zero(4, 1)}) - m).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(WeightedFeatures, MatchesBruteForce) {
  const FeatureStack s = stack_of({random_matrix(3, 5, 5), random_matrix(3, 5, 6)});
  TaskWeights tw{(Matrix(2, 1) << 0.3, -0.4).finished()};
  const Real e0 = std::exp(0.3), e1 = std::exp(-0.4);
  const Real w0 = e0 / (e0 + e1), w1 = e1 / (e0 + e1);
  const Matrix y = weighted_features(s, tw);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 5; ++j) EXPECT_NEAR(y(i, j), w0 * s.layers[0](i, j) + w1 * s.layers[1](i, j), 1e-12);
  EXPECT_THROW(weighted_features(s, TaskWeights{Matrix::Zero(3, 1)}), ShapeError);
}

TEST(ProbeLoss, GradientMatchesFiniteDifferences) {
  ProbeItem it;
  it.features = stack_of({random_matrix(5, 7, 7), random_matrix(5, 7, 8), random_matrix(5, 7, 9)});
  it.labels = {0, 1, 2, 3, 0, 1, 2};
  DownstreamParams p = init_downstream(3, 5, 4, 1);
  p.task.logits = random_matrix(3, 1, 10);
  p.probe.weight = random_matrix(4, 5, 11);
  const std::vector<const ProbeItem *> batch = {&it};
  DownstreamParams g = nn::zeros_like(p);
  probe_loss(p, batch, &g);
  auto f = [&] { return probe_loss(p, batch, nullptr); };
  EXPECT_LT(testing::relative_error(g.task.logits, testing::numeric_grad(p.task.logits, f)), 1e-7);
  EXPECT_LT(testing::relative_error(g.probe.weight, testing::numeric_grad(p.probe.weight, f)), 1e-7);
  EXPECT_LT(testing::relative_error(g.probe.bias, testing::numeric_grad(p.probe.bias, f)), 1e-7);
}

class ProbeOnCorpus : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    CorpusConfig c;
    c.master_seed = 1;
    corpus_ = new Corpus;
    for (Split s : {Split::kTrain, Split::kDev})
      for (int i = 0; i < c.count(s); ++i) corpus_->items.push_back(make_item(c, s, i));
    EncoderConfig ec;
    ec.seed = 1;
    encoder_ = new EncoderParams(init_frozen_encoder(ec));
  }
  static void TearDownTestSuite() {
    delete corpus_;
    delete encoder_;
  }
  static std::vector<ProbeItem> items(Split s, ProbeInput in, const SEParams *se = nullptr) {
    return extract_probe_items(corpus_->split(s), *encoder_, se, in);
  }
  static Corpus *corpus_;
  static EncoderParams *encoder_;
};

Corpus *ProbeOnCorpus::corpus_ = nullptr;
EncoderParams *ProbeOnCorpus::encoder_ = nullptr;

TEST_F(ProbeOnCorpus, RandomProbeIsAtChance) {
  const auto dev = items(Split::kDev, ProbeInput::kClean);
  const Real acc = eval_probe(dev, init_downstream(8, 64, 8, 3));
  EXPECT_NEAR(acc, 1.0 / 8.0, 0.05);
}

TEST_F(ProbeOnCorpus, CleanTrainingIsAccurateAndDeterministic) {
  const std::string enc_before = params_sha256(*encoder_);
  const auto train = items(Split::kTrain, ProbeInput::kClean), dev = items(Split::kDev, ProbeInput::kClean);
  const ProbeResult a = train_probe(train, dev, 8, 1), b = train_probe(train, dev, 8, 1);
  EXPECT_GE(a.dev_accuracy, 0.85);
  EXPECT_EQ(a.dev_accuracy, b.dev_accuracy);
  EXPECT_EQ(params_sha256(a.params), params_sha256(b.params));
  ASSERT_EQ(a.train_loss.size(), 20u);
  EXPECT_LT(a.train_loss.back(), a.train_loss.front());
  const Real noisy = eval_probe(items(Split::kDev, ProbeInput::kNoisy), a.params);
  EXPECT_GE(a.dev_accuracy, noisy);
  EXPECT_GE(noisy, 0.0);
  EXPECT_LE(a.dev_accuracy, 1.0);
  EXPECT_EQ(params_sha256(*encoder_), enc_before);
}

TEST_F(ProbeOnCorpus, FrontendIsNotModified) {
  const SEParams se = init_se_model(SEConfig{}, 1);
  const std::string before = params_sha256(se);
  auto sub = corpus_->split(Split::kDev);
  sub.resize(2);
  const auto it = extract_probe_items(sub, *encoder_, &se, ProbeInput::kNoisy);
  const ProbeResult r = train_probe(it, it, 8, 2, ProbeOptions{2, 1e-2, 8});
  EXPECT_EQ(params_sha256(se), before);
  EXPECT_GE(r.dev_accuracy, 0.0);
}

TEST_F(ProbeOnCorpus, FrontendMatchesPreEnhancedInput) {
  const SEParams se = init_se_model(SEConfig{}, 4);
  auto sub = corpus_->split(Split::kDev);
  sub.resize(3);
  std::vector<CorpusItem> enhanced;
  for (const auto *it : sub) {
    CorpusItem copy = *it;
    copy.mixture = enhance(se, it->mixture);
    enhanced.push_back(std::move(copy));
  }
  std::vector<const CorpusItem *> pre;
  for (const auto &it : enhanced) pre.push_back(&it);
  const auto a = extract_probe_items(sub, *encoder_, &se, ProbeInput::kNoisy);
  const auto b = extract_probe_items(pre, *encoder_, nullptr, ProbeInput::kNoisy);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].labels, b[i].labels);
    for (int n = 0; n < a[i].features.n_layers(); ++n)
      EXPECT_LE((a[i].features.layers[n] - b[i].features.layers[n]).cwiseAbs().maxCoeff(), 1e-6);
  }
  const DownstreamParams probe = init_downstream(8, 64, 8, 5);
  EXPECT_NEAR(eval_probe(a, probe), eval_probe(b, probe), 1e-6);
}

}  // namespace
}  // namespace sslmse
