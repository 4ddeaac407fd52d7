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

#include "sslmse/nn.hpp"
#include "sslmse/semodel.hpp"
#include "sslmse/sslenc.hpp"
#include "test_util.hpp"

namespace sslmse {
namespace {

using testing::numeric_grad;
using testing::random_matrix;
using testing::random_vector;
using testing::relative_error;

TEST(FrameSignal, OverlapAddIsAdjoint) {
  const Vector x = random_vector(100, 1);
  const Matrix y = random_matrix(20, 9, 2);
  // <frame(x), y> == <x, ola(y)>
  const Real lhs = nn::frame_signal(x, 20, 10, 9).cwiseProduct(y).sum();
  const Real rhs = x.dot(nn::overlap_add(y, 10, 100));
  EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(DepthwiseConv, MatchesDirectSum) {
  const Matrix x = random_matrix(3, 12, 3);
  const Matrix w = random_matrix(3, 3, 4);
  const Matrix b = random_matrix(3, 1, 5);
  const int dil = 2;
  const Matrix y = nn::depthwise_conv(x, w, b, dil);
  for (int c = 0; c < 3; ++c)
    for (int t = 0; t < 12; ++t) {
      Real ref = b(c, 0);
      for (int k = 0; k < 3; ++k) {
        const int s = t + (k - 1) * dil;
        if (s >= 0 && s < 12) ref += w(c, k) * x(c, s);
      }
      EXPECT_NEAR(y(c, t), ref, 1e-12);
    }
}

TEST(DepthwiseConv, BackwardMatchesFiniteDifferences) {
  Matrix x = random_matrix(4, 10, 6);
  Matrix w = random_matrix(4, 3, 7);
  Matrix b = random_matrix(4, 1, 8);
  const Matrix probe = random_matrix(4, 10, 9);
  auto f = [&] { return nn::depthwise_conv(x, w, b, 4).cwiseProduct(probe).sum(); };
  Matrix dx, dw = Matrix::Zero(4, 3), db = Matrix::Zero(4, 1);
  nn::depthwise_conv_backward(x, w, 4, probe, &dx, &dw, &db);
  EXPECT_LT(relative_error(dx, numeric_grad(x, f)), 1e-8);
  EXPECT_LT(relative_error(dw, numeric_grad(w, f)), 1e-8);
  EXPECT_LT(relative_error(db, numeric_grad(b, f)), 1e-8);
}

TEST(GlobalNorm, BackwardMatchesFiniteDifferences) {
  Matrix x = random_matrix(5, 7, 10);
  Matrix g = random_matrix(5, 1, 11);
  Matrix be = random_matrix(5, 1, 12);
  const Matrix probe = random_matrix(5, 7, 13);
  auto f = [&] {
    nn::GlobalNorm n;
    return n.forward(x, g, be).cwiseProduct(probe).sum();
  };
  nn::GlobalNorm norm;
  norm.forward(x, g, be);
  Matrix dg = Matrix::Zero(5, 1), db = Matrix::Zero(5, 1);
  const Matrix dx = norm.backward(g, probe, &dg, &db);
  EXPECT_LT(relative_error(dx, numeric_grad(x, f)), 1e-7);
  EXPECT_LT(relative_error(dg, numeric_grad(g, f)), 1e-7);
  EXPECT_LT(relative_error(db, numeric_grad(be, f)), 1e-7);
}

TEST(FrameNorm, BackwardMatchesFiniteDifferences) {
  Matrix x = random_matrix(6, 4, 14);
  const Matrix g = random_matrix(6, 1, 15);
  const Matrix be = random_matrix(6, 1, 16);
  const Matrix probe = random_matrix(6, 4, 17);
  auto f = [&] {
    nn::FrameNorm n;
    return n.forward(x, g, be).cwiseProduct(probe).sum();
  };
  nn::FrameNorm norm;
  norm.forward(x, g, be);
  EXPECT_LT(relative_error(norm.backward(g, probe), numeric_grad(x, f)), 1e-7);
}

TEST(Gelu, BackwardAndOddPart) {
  Matrix x = random_matrix(3, 5, 18);
  const Matrix probe = random_matrix(3, 5, 19);
  auto f = [&] { return nn::gelu(x).cwiseProduct(probe).sum(); };
  EXPECT_LT(relative_error(nn::gelu_backward(x, probe), numeric_grad(x, f)), 1e-8);
  const Matrix odd = nn::gelu(x) - nn::gelu(-x);
  EXPECT_LT((odd - x).cwiseAbs().maxCoeff(), 1e-15);
}

struct OneTensor {
  Matrix w;
  template <class F> void for_each(F &&f) { f(std::string("w"), w); }
  template <class F> void for_each(F &&f) const { f(std::string("w"), w); }
};

TEST(Adam, FirstStepMovesByLearningRate) {
  using P = OneTensor;
  P p{Matrix::Constant(2, 1, 1.0)};
  P g{Matrix::Constant(2, 1, 0.5)};
  nn::Adam opt;
  opt.step(p, g, 0.01);
  // Bias-corrected first step is lr * sign(g) up to eps.
  EXPECT_NEAR(p.w(0, 0), 0.99, 1e-7);
}

SEConfig tiny_se() { return {16, 8, 8, 1, 2, 16, 3}; }

TEST(SEModel, BackwardMatchesFiniteDifferences) {
  SEParams se = init_se_model(tiny_se(), 3);
  const Vector y = random_vector(61, 20, 0.3);
  const Vector probe = random_vector(61, 21);
  auto f = [&] { return enhance(se, y).dot(probe); };
  SETape tape;
  enhance(se, y, &tape);
  SEParams grads = nn::zeros_like(se);
  enhance_backward(se, tape, probe, grads);
  auto pt = nn::tensor_list(se);
  auto gt = nn::tensor_list(grads);
  std::vector<std::string> names;
  se.for_each([&](const std::string &n, const Matrix &) { names.push_back(n); });
  for (std::size_t i = 0; i < pt.size(); ++i) {
    const Matrix num = numeric_grad(*pt[i], f);
    EXPECT_LT(relative_error(*gt[i], num), 1e-5) << names[i];
  }
}

TEST(Encoder, InputGradientMatchesFiniteDifferences) {
  EncoderConfig cfg{3, 6, 4, 8, 11, 2, 5, 4};
  const EncoderParams enc = init_frozen_encoder(cfg);
  Vector x = random_vector(50, 22, 0.3);
  std::vector<Matrix> probes;
  const Eigen::Index frames = cfg.frames_for(50);
  for (int n = 0; n < 3; ++n) probes.push_back(random_matrix(6, frames, 30 + n));
  auto f = [&] {
    const FeatureStack s = encode(enc, x);
    Real v = 0.0;
    for (int n = 0; n < 3; ++n) v += s.layers[n].cwiseProduct(probes[n]).sum();
    return v;
  };
  EncoderTape tape;
  encode(enc, x, &tape);
  const Vector dx = encode_backward(enc, tape, probes);
  EXPECT_LT(relative_error(dx, numeric_grad(x, f)), 1e-6);
}

}  // namespace
}  // namespace sslmse
