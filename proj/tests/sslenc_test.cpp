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
#include "sslmse/sslenc.hpp"
#include "test_util.hpp"

namespace sslmse {
namespace {

using testing::random_vector;

Real gelu_scalar(Real v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); }

TEST(EncoderInit, DeterministicPerSeed) {
  EncoderConfig a;
  a.seed = 3;
  EncoderConfig b = a;
  b.seed = 4;
  EXPECT_EQ(params_sha256(init_frozen_encoder(a)), params_sha256(init_frozen_encoder(a)));
  EXPECT_NE(params_sha256(init_frozen_encoder(a)), params_sha256(init_frozen_encoder(b)));
}

TEST(EncoderInit, ShapesFollowConfig) {
  const EncoderConfig c;
  const EncoderParams p = init_frozen_encoder(c);
  EXPECT_EQ(p.frontend1.rows(), c.frontend_channels);
  EXPECT_EQ(p.frontend1.cols(), c.frontend_filter);
  EXPECT_EQ(p.frontend2.rows(), c.dim);
  EXPECT_EQ(p.frontend2.cols(), c.frontend_channels * c.stage2_kernel());
  ASSERT_EQ(static_cast<int>(p.blocks.size()), c.n_layers);
  for (const auto &b : p.blocks) {
    EXPECT_EQ(b.dw_weight.rows(), c.dim);
    EXPECT_EQ(b.dw_weight.cols(), kEncoderDwTaps);
    EXPECT_EQ(b.pw_weight.rows(), c.dim);
    EXPECT_EQ(b.pw_weight.cols(), c.dim);
  }
  for (Eigen::Index r = 0; r < p.frontend1.rows(); ++r) EXPECT_NEAR(p.frontend1.row(r).norm(), 1.0, 1e-6);
}

TEST(EncoderConfigCheck, RejectsInconsistentFrontend) {
  EncoderConfig c;
  c.frontend_stride = 7;  // does not divide hop 80
  EXPECT_THROW(c.validate(), ConfigError);
  c = EncoderConfig{};
  c.frontend_filter = 125;  // 160 - 125 not a multiple of 10
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Encode, FrameArithmetic) {
  const EncoderParams p = init_frozen_encoder(EncoderConfig{});
  EXPECT_EQ(p.config.frames_for(1600), 19);
  const FeatureStack f = encode(p, random_vector(1600, 1, 0.1));
  EXPECT_EQ(f.frames(), 19);
  EXPECT_THROW(encode(p, random_vector(159, 2)), ShapeError);
}

TEST(Encode, Deterministic) {
  const EncoderParams p = init_frozen_encoder(EncoderConfig{});
  const Vector x = random_vector(2000, 3, 0.1);
  const FeatureStack a = encode(p, x), b = encode(p, x);
  for (int n = 0; n < a.n_layers(); ++n) EXPECT_EQ(a.layers[n], b.layers[n]);
}

TEST(Encode, DefaultLayerDims) {
  const EncoderParams p = init_frozen_encoder(EncoderConfig{});
  EXPECT_EQ(layer_dims(p), (LayerDims{8, 64, 80}));
  const FeatureStack f = encode(p, random_vector(8000, 4, 0.1));
  EXPECT_EQ(f.n_layers(), 8);
  EXPECT_EQ(f.dim(), 64);
  EXPECT_EQ(f.hop, 80);
}

TEST(Encode, IdentityBlockReproducesFrontend) {
  EncoderConfig c;
  c.n_layers = 1;
  EncoderParams p = init_frozen_encoder(c);
  p.blocks[0].norm_gain.setZero();
  p.blocks[0].norm_bias.setZero();
  Vector x = Vector::Zero(800);
  x[300] = 1.0;
  const FeatureStack f = encode(p, x);
  ASSERT_EQ(f.n_layers(), 1);

  // Direct convolution: stage 1, gelu, stage 2, then per-frame normalisation.
  const int s1 = c.frontend_stride, k1 = c.frontend_filter, s2 = c.stage2_stride(), k2 = c.stage2_kernel();
  const Eigen::Index frames = c.frames_for(x.size());
  ASSERT_EQ(f.frames(), frames);
  for (Eigen::Index j = 0; j < frames; ++j) {
    Vector col = Vector::Zero(c.dim);
    for (int i = 0; i < k2; ++i)
      for (int ch = 0; ch < c.frontend_channels; ++ch) {
        Real pre = 0.0;
        const Eigen::Index start = (j * s2 + i) * s1;
        for (int n = 0; n < k1; ++n) pre += p.frontend1(ch, n) * x[start + n];
        const Real g = gelu_scalar(pre);
        for (int d = 0; d < c.dim; ++d) col[d] += p.frontend2(d, i * c.frontend_channels + ch) * g;
      }
    const Real mean = col.mean();
    const Real var = (col.array() - mean).square().mean();
    const Vector ref = (col.array() - mean) / std::sqrt(var + nn::kNormEps);
    EXPECT_LE((f.layers[0].col(j) - ref).cwiseAbs().maxCoeff(), 1e-9) << "frame " << j;
  }
}

TEST(Encode, OutputsAreFinite) {
  const EncoderParams p = init_frozen_encoder(EncoderConfig{});
  const FeatureStack f = encode(p, Vector::Zero(1000));
  for (const auto &l : f.layers) EXPECT_TRUE(l.allFinite());
}

}  // namespace
}  // namespace sslmse
