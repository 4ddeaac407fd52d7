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

#ifndef SSLMSE_SIGNAL_HPP_
#define SSLMSE_SIGNAL_HPP_

#include <cmath>
#include <utility>

#include "sslmse/common.hpp"

namespace sslmse {

inline constexpr int kDefaultSampleRate = 8000;
// Relative floor inside every log power ratio; caps metrics near 80 dB.
inline constexpr Real kRatioFloor = 1e-8;

struct Waveform {
  Vector samples;
  int sample_rate = kDefaultSampleRate;

  Waveform() = default;
  Waveform(Vector s, int rate) : samples(std::move(s)), sample_rate(rate) {}

  Eigen::Index size() const { return samples.size(); }
  Real duration_s() const {
    return static_cast<Real>(samples.size()) / sample_rate;
  }
  /// Length >= 1, positive rate, finite samples.
  void validate() const {
    if (samples.size() < 1) throw ValueError("waveform is empty");
    if (sample_rate <= 0) throw ValueError("sample rate must be positive");
    if (!samples.allFinite()) throw ValueError("waveform has non-finite samples");
  }
};

struct MixtureSpec {
  Real snr_db = 0.0;
  std::uint64_t seed = 0;
};

/// Mean power (1/T) * sum x^2.
inline Real power(const Vector &x) {
  return x.size() == 0 ? 0.0 : x.squaredNorm() / static_cast<Real>(x.size());
}

inline void check_same_length(const Waveform &a, const Waveform &b,
                              const char *op) {
  if (a.size() != b.size())
    throw ShapeError(std::string(op) + ": length mismatch (" +
                     std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
}

/// Noise gain g such that 10 log10(P_source / (g^2 P_noise)) == snr_db.
inline Real snr_gain(Real source_power, Real noise_power, Real snr_db) {
  if (!(source_power > 0.0)) throw ValueError("mix_at_snr: zero-power source");
  if (!(noise_power > 0.0)) throw ValueError("mix_at_snr: zero-power noise");
  if (!std::isfinite(snr_db)) throw ValueError("mix_at_snr: non-finite snr");
  return std::pow(10.0, -snr_db / 20.0) * std::sqrt(source_power / noise_power);
}

struct Mixture {
  Waveform mixture;
  Waveform scaled_noise;
  Real gain = 0.0;
};

inline Mixture mix_at_snr(const Waveform &source, const Waveform &noise,
                          Real snr_db) {
  check_same_length(source, noise, "mix_at_snr");
  if (source.sample_rate != noise.sample_rate)
    throw ShapeError("mix_at_snr: sample rate mismatch");
  const Real g = snr_gain(power(source.samples), power(noise.samples), snr_db);
  Mixture m;
  m.gain = g;
  m.scaled_noise = Waveform(noise.samples * g, source.sample_rate);
  m.mixture = Waveform(source.samples + m.scaled_noise.samples,
                       source.sample_rate);
  return m;
}

/// SNR of a source against an additive noise signal, in dB.
inline Real measured_snr(const Vector &source, const Vector &noise) {
  return 10.0 * std::log10(source.squaredNorm() / noise.squaredNorm());
}

/// Scale-dependent SNR: 10 log10(|r|^2 / (|r - e|^2 + eps |r|^2)).
inline Real sd_snr(const Vector &estimate, const Vector &reference) {
  if (estimate.size() != reference.size())
    throw ShapeError("sd_snr: length mismatch");
  const Real ref = reference.squaredNorm();
  if (!(ref > 0.0)) throw ValueError("sd_snr: zero reference");
  const Real err = (reference - estimate).squaredNorm();
  return 10.0 * std::log10(ref / (err + kRatioFloor * ref));
}

inline Real sd_snr(const Waveform &estimate, const Waveform &reference) {
  check_same_length(estimate, reference, "sd_snr");
  return sd_snr(estimate.samples, reference.samples);
}

/// Gradient of sd_snr with respect to the estimate.
inline Vector sd_snr_grad(const Vector &estimate, const Vector &reference) {
  const Real ref = reference.squaredNorm();
  const Vector diff = reference - estimate;
  const Real den = diff.squaredNorm() + kRatioFloor * ref;
  return (20.0 / std::log(10.0) / den) * diff;
}

/// Scale-invariant SDR. The estimate is projected on the reference; the
/// projection is the target and the remainder the distortion.
inline Real si_sdr(const Vector &estimate, const Vector &reference) {
  if (estimate.size() != reference.size())
    throw ShapeError("si_sdr: length mismatch");
  const Real ref = reference.squaredNorm();
  if (!(ref > 0.0)) throw ValueError("si_sdr: zero reference");
  const Vector target = (estimate.dot(reference) / ref) * reference;
  const Real tgt = target.squaredNorm();
  if (!(tgt > 0.0)) throw ValueError("si_sdr: estimate orthogonal to reference");
  const Real dist = (estimate - target).squaredNorm();
  return 10.0 * std::log10(tgt / (dist + kRatioFloor * tgt));
}

inline Real si_sdr(const Waveform &estimate, const Waveform &reference) {
  check_same_length(estimate, reference, "si_sdr");
  return si_sdr(estimate.samples, reference.samples);
}

}  // namespace sslmse

#endif  // SSLMSE_SIGNAL_HPP_
