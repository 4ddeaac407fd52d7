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
#include "sslmse/semodel.hpp"
#include "test_util.hpp"

namespace sslmse {
namespace {

using testing::random_vector;

TEST(SEConfigCheck, FullScaleConstants) {
  const SEConfig c = SEConfig::full_scale();
  EXPECT_EQ(c.basis, 4096);
  EXPECT_EQ(c.window, 320);
  EXPECT_EQ(c.bottleneck, 256);
  EXPECT_EQ(c.repeats, 4);
  EXPECT_EQ(c.blocks, 8);
  EXPECT_EQ(c.hidden, 512);
  EXPECT_EQ(c.kernel, 3);
}

TEST(SEConfigCheck, DeskScaleDefaults) {
  EXPECT_EQ(SEConfig{}, (SEConfig{128, 32, 32, 2, 4, 64, 3}));
  EXPECT_EQ(SEConfig{}.stride(), 16);
  EXPECT_THROW((SEConfig{128, 31, 32, 2, 4, 64, 3}.validate()), ConfigError);
  EXPECT_THROW((SEConfig{128, 32, 32, 2, 4, 64, 4}.validate()), ConfigError);
}

TEST(SEInit, DeterministicPerSeed) {
  EXPECT_EQ(params_sha256(init_se_model(SEConfig{}, 5)), params_sha256(init_se_model(SEConfig{}, 5)));
  EXPECT_NE(params_sha256(init_se_model(SEConfig{}, 5)), params_sha256(init_se_model(SEConfig{}, 6)));
}

TEST(Enhance, OutputLengthMatchesInput) {
  const SEParams p = init_se_model(SEConfig{}, 1);
  const int l = p.config.window;
  for (int t : {l, l + 1, 10 * l + 7}) EXPECT_EQ(enhance(p, random_vector(t, t, 0.1)).size(), t);
}

TEST(Enhance, ZeroInGivesZeroOut) {
  SEParams p = init_se_model(SEConfig{}, 2);
  p.for_each([](const std::string &name, Matrix &m) {
    if (name.find("bias") != std::string::npos) m.setZero();
  });
  EXPECT_EQ(enhance(p, Vector::Zero(500)).cwiseAbs().maxCoeff(), 0.0);
}

// Orthonormal DCT-II basis as the top half of [A; -A]; with a saturated mask
// the model reduces to windowed analysis/synthesis with 50% overlap.
TEST(Enhance, TightFrameWithUnitMaskReconstructs) {
  SEConfig c;
  c.basis = 2 * c.window;
  SEParams p = init_se_model(c, 3);
  const int l = c.window;
  Matrix a(l, l);
  for (int k = 0; k < l; ++k)
    for (int n = 0; n < l; ++n)
      a(k, n) = std::sqrt((k == 0 ? 1.0 : 2.0) / l) * std::cos(M_PI * (n + 0.5) * k / l);
  set_tight_frame_basis(p, a);
  p.mask_weight.setZero();
  p.mask_bias.setConstant(40.0);
  const Vector x = random_vector(10 * l + 7, 4, 0.3);
  const Vector y = enhance(p, x);
  EXPECT_LE((y - x).norm() / x.norm(), 1e-5);
}

TEST(Enhance, DefaultInitStartsNearIdentity) {
  const SEParams p = init_se_model(SEConfig{}, 4);
  const Vector x = random_vector(1000, 5, 0.3);
  const Vector y = enhance(p, x);
  EXPECT_GT(si_sdr(y, x), 20.0);
}

}  // namespace
}  // namespace sslmse
