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

#include <filesystem>
#include <random>

#include "sslmse/signal.hpp"
#include "sslmse/wav.hpp"
#include "test_util.hpp"

namespace sslmse {
namespace {

using testing::random_vector;

Waveform constant_power(Eigen::Index n, Real p, std::uint64_t seed) {
  Vector v = random_vector(n, seed);
  v *= std::sqrt(p / power(v));
  return Waveform(v, kDefaultSampleRate);
}

TEST(MixAtSnr, EqualPowersGiveUnitGain) {
  const Mixture m = mix_at_snr(constant_power(1000, 1.0, 1), constant_power(1000, 1.0, 2), 0.0);
  EXPECT_NEAR(m.gain, 1.0, 1e-12);
}

TEST(MixAtSnr, QuarterPowerNoiseAtTenDb) {
  const Mixture m = mix_at_snr(constant_power(1000, 1.0, 3), constant_power(1000, 0.25, 4), 10.0);
  EXPECT_NEAR(m.gain, std::sqrt(0.4), 1e-12);
  EXPECT_NEAR(m.gain, 0.63246, 1e-5);
}

TEST(MixAtSnr, SixtyDbLeavesSourceAlmostUntouched) {
  const Waveform s = constant_power(1000, 1.0, 5);
  const Mixture m = mix_at_snr(s, constant_power(1000, 1.0, 6), 60.0);
  EXPECT_NEAR(m.gain, 1e-3, 1e-15);
  EXPECT_LE((m.mixture.samples - s.samples).norm() / s.samples.norm(), 1.001e-3);
}

TEST(MixAtSnr, MeasuredSnrMatchesTargetOnRandomCases) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<Real> snr(-10.0, 40.0), scale(0.01, 10.0);
  for (int i = 0; i < 100; ++i) {
    const Waveform s(random_vector(800, 100 + i, scale(rng)), kDefaultSampleRate);
    const Waveform n(random_vector(800, 200 + i, scale(rng)), kDefaultSampleRate);
    const Real target = snr(rng);
    const Mixture m = mix_at_snr(s, n, target);
    EXPECT_NEAR(measured_snr(s.samples, m.scaled_noise.samples), target, 1e-6);
  }
}

TEST(MixAtSnr, RejectsBadInputs) {
  const Waveform s = constant_power(100, 1.0, 8);
  EXPECT_THROW(mix_at_snr(s, constant_power(99, 1.0, 9), 0.0), ShapeError);
  EXPECT_THROW(mix_at_snr(s, Waveform(Vector::Zero(100), kDefaultSampleRate), 0.0), ValueError);
  EXPECT_THROW(mix_at_snr(Waveform(Vector::Zero(100), kDefaultSampleRate), s, 0.0), ValueError);
}

TEST(SdSnr, Examples) {
  Vector r = Vector::Zero(100);
  r.setConstant(1.0);  // |r|^2 = 100
  EXPECT_NEAR(sd_snr(r, r), 80.0, 1e-9);
  Vector e = r;
  e[0] = 0.0;  // |r - e|^2 = 1
  EXPECT_NEAR(sd_snr(e, r), 10.0 * std::log10(100.0 / (1.0 + 1e-6)), 1e-12);
  EXPECT_NEAR(sd_snr(e, r), 20.0, 1e-5);
  EXPECT_NEAR(sd_snr(Vector::Zero(100), r), 0.0, 1e-6);
  EXPECT_THROW(sd_snr(r, Vector::Zero(100)), ValueError);
  EXPECT_THROW(sd_snr(r, Vector::Ones(99)), ShapeError);
}

TEST(SdSnr, DecreasesWithAddedNoisePower) {
  const Vector r = random_vector(500, 10);
  const Vector n = random_vector(500, 11);
  Real prev = sd_snr(r + 0.01 * n, r);
  for (Real g : {0.02, 0.05, 0.1, 0.3, 1.0}) {
    const Real cur = sd_snr(r + g * n, r);
    EXPECT_LT(cur, prev);
    prev = cur;
  }
}

TEST(SiSdr, OrthogonalNoiseExample) {
  Vector r = Vector::Zero(4);
  r << 2.0, 0.0, 0.0, 0.0;  // |r|^2 = 4
  Vector e = r;
  e[1] = 1.0;  // n orthogonal to r, |n|^2 = 1
  EXPECT_NEAR(si_sdr(e, r), 10.0 * std::log10(4.0 / (1.0 + 4e-8)), 1e-12);
  EXPECT_NEAR(si_sdr(e, r), 6.0206, 1e-4);
}

TEST(SiSdr, ScaleInvariance) {
  for (int i = 0; i < 20; ++i) {
    const Vector r = random_vector(400, 300 + i);
    const Vector e = r + 0.5 * random_vector(400, 400 + i);
    const Real base = si_sdr(e, r);
    for (Real a : {0.1, 3.7}) EXPECT_NEAR(si_sdr(a * e, r), base, 1e-6);
  }
  const Vector r = random_vector(50, 12);
  EXPECT_NEAR(si_sdr(2.0 * r, r), si_sdr(r, r), 1e-9);
  EXPECT_NEAR(si_sdr(r, r), 80.0, 1e-6);
}

TEST(SiSdr, RejectsDegenerateInputs) {
  Vector r = Vector::Zero(4), e = Vector::Zero(4);
  r[0] = 1.0;
  e[1] = 1.0;
  EXPECT_THROW(si_sdr(e, r), ValueError);
  EXPECT_THROW(si_sdr(r, Vector::Zero(4)), ValueError);
}

TEST(Wav, RampRoundtripIsBitExact) {
  Vector ramp(8000);
  for (int i = 0; i < 8000; ++i) ramp[i] = from_pcm16(static_cast<std::int16_t>(i * 8 - 32000));
  const Waveform w(ramp, 8000);
  const auto path = std::filesystem::path(::testing::TempDir()) / "ramp.wav";
  write_wav(path, w);
  const Waveform r = read_wav(path);
  ASSERT_EQ(r.size(), 8000);
  EXPECT_EQ(r.sample_rate, 8000);
  for (int i = 0; i < 8000; ++i) ASSERT_EQ(to_pcm16(r.samples[i]), to_pcm16(ramp[i]));
  EXPECT_EQ(encode_wav(r), encode_wav(w));
}

TEST(Wav, StereoIsRejected) {
  std::string bytes = encode_wav(Waveform(Vector::Zero(4), 8000));
  bytes[22] = 2;  // channel count
  try {
    decode_wav(bytes);
    FAIL() << "expected an error";
  } catch (const FormatError &e) {
    EXPECT_NE(std::string(e.what()).find("unsupported channels"), std::string::npos);
  }
}

TEST(Wav, OtherBitDepthAndGarbageAreRejected) {
  std::string bytes = encode_wav(Waveform(Vector::Zero(4), 8000));
  bytes[34] = 24;
  EXPECT_THROW(decode_wav(bytes), FormatError);
  EXPECT_THROW(decode_wav("not a wav file"), FormatError);
}

TEST(Wav, FullScaleWordScaling) {
  EXPECT_EQ(from_pcm16(32767), 32767.0 / 32768.0);
  EXPECT_EQ(from_pcm16(-32768), -1.0);
  EXPECT_EQ(to_pcm16(1.5), 32767);
  EXPECT_EQ(to_pcm16(-2.0), -32768);
}

}  // namespace
}  // namespace sslmse
