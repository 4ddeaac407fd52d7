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

#ifndef SSLMSE_DATASIM_HPP_
#define SSLMSE_DATASIM_HPP_

// Synthetic corpus: token-structured harmonic sources with frame labels, and
// band-limited noise interferers. Every item is a pure function of a seed
// derived from (master_seed, split, index).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sslmse/signal.hpp"
#include "sslmse/wav.hpp"

namespace sslmse {

struct TokenSource {
  Waveform waveform;
  std::vector<std::uint16_t> labels;  // one per hop-sized block
  int token_count = 0;
  int hop = 0;
};

struct SourceOptions {
  int sample_rate = kDefaultSampleRate;
  int hop = 80;
  Real min_segment_s = 0.08;
  Real max_segment_s = 0.40;
  Real f0_min = 90.0;
  Real f0_max = 300.0;
};

/// Pitch and spectral tilt of token c. f0 sits on an even grid; tilt follows a
/// low-discrepancy sequence so neighbouring pitches differ in timbre.
inline std::pair<Real, Real> token_timbre(int c, int n_tokens, const SourceOptions &opt) {
  const Real f0 = opt.f0_min + (opt.f0_max - opt.f0_min) * c / std::max(1, n_tokens - 1);
  const Real frac = std::fmod(0.5 + c * 0.6180339887498949, 1.0);
  const Real tilt = 0.3 + 1.7 * frac;  // harmonic h has amplitude h^-tilt
  return {f0, tilt};
}

inline Eigen::Index samples_for(Real duration_s, int sample_rate) {
  return static_cast<Eigen::Index>(std::llround(duration_s * sample_rate));
}

inline TokenSource gen_source(std::uint64_t seed, Real duration_s, int n_tokens,
                              const SourceOptions &opt = {}) {
  if (n_tokens < 2) throw ValueError("gen_source: token count must be >= 2");
  if (duration_s < 0.25) throw ValueError("gen_source: duration must be >= 0.25 s");
  if (n_tokens > 65535) throw ValueError("gen_source: too many tokens for u16 labels");
  const int sr = opt.sample_rate;
  const Eigen::Index total = samples_for(duration_s, sr);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Real> u01(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, n_tokens - 1);

  Vector x = Vector::Zero(total);
  std::vector<std::uint16_t> token_at(static_cast<std::size_t>(total), 0);
  const Real jitter = 1.0 + 0.04 * (u01(rng) - 0.5);
  const Eigen::Index ramp = std::max<Eigen::Index>(1, samples_for(0.01, sr));
  Eigen::Index pos = 0;
  while (pos < total) {
    const Real seg_s = opt.min_segment_s + (opt.max_segment_s - opt.min_segment_s) * u01(rng);
    const Eigen::Index len = std::min<Eigen::Index>(total - pos, std::max<Eigen::Index>(1, samples_for(seg_s, sr)));
    const int tok = pick(rng);
    const auto [f0_nominal, tilt] = token_timbre(tok, n_tokens, opt);
    const Real f0 = f0_nominal * jitter;
    const Real gain = 0.6 + 0.4 * u01(rng);
    const Real vib_rate = 3.0 + 3.0 * u01(rng);
    const Real phase0 = 2.0 * std::numbers::pi * u01(rng);
    const int harmonics = static_cast<int>(0.45 * sr / f0);
    Real phase = phase0;
    for (Eigen::Index i = 0; i < len; ++i) {
      const Real t = static_cast<Real>(i) / sr;
      const Real inst_f0 = f0 * (1.0 + 0.01 * std::sin(2.0 * std::numbers::pi * vib_rate * t));
      phase += 2.0 * std::numbers::pi * inst_f0 / sr;
      Real v = 0.0;
      for (int h = 1; h <= harmonics; ++h) v += std::pow(static_cast<Real>(h), -tilt) * std::sin(h * phase);
      Real env = 1.0;
      if (i < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * i / ramp);
      if (len - 1 - i < ramp) env = std::min(env, 0.5 - 0.5 * std::cos(std::numbers::pi * (len - 1 - i) / ramp));
      x[pos + i] = gain * env * v;
      token_at[static_cast<std::size_t>(pos + i)] = static_cast<std::uint16_t>(tok);
    }
    pos += len;
  }
  const Real peak = x.cwiseAbs().maxCoeff();
  const Real target_peak = 0.5 + 0.4 * u01(rng);
  if (peak > 0.0) x *= target_peak / peak;

  TokenSource out;
  out.token_count = n_tokens;
  out.hop = opt.hop;
  const Eigen::Index n_labels = total / opt.hop;
  out.labels.resize(static_cast<std::size_t>(n_labels));
  for (Eigen::Index k = 0; k < n_labels; ++k)
    out.labels[static_cast<std::size_t>(k)] = token_at[static_cast<std::size_t>(k * opt.hop + opt.hop / 2)];
  out.waveform = Waveform(std::move(x), sr);
  return out;
}

namespace datasim_detail {

/// Windowed-sinc band-pass, Hann window, odd length.
inline Vector bandpass_fir(Real lo_hz, Real hi_hz, int sample_rate, int taps) {
  Vector h(taps);
  const int mid = taps / 2;
  const Real fl = lo_hz / sample_rate, fh = hi_hz / sample_rate;
  for (int n = 0; n < taps; ++n) {
    const int k = n - mid;
    auto sinc_lp = [k](Real fc) {
      return k == 0 ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * k) / (std::numbers::pi * k);
    };
    const Real win = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / (taps - 1));
    h[n] = (sinc_lp(fh) - sinc_lp(fl)) * win;
  }
  return h;
}

}  // namespace datasim_detail

inline constexpr Real kNoiseRms = 0.1;

/// Band-filtered Gaussian noise, optionally with an amplitude-modulated tone,
/// normalized to rms kNoiseRms.
inline Waveform gen_noise(std::uint64_t seed, Real duration_s, int sample_rate = kDefaultSampleRate) {
  if (duration_s < 0.25) throw ValueError("gen_noise: duration must be >= 0.25 s");
  const Eigen::Index total = samples_for(duration_s, sample_rate);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Real> u01(0.0, 1.0);
  std::normal_distribution<Real> gauss(0.0, 1.0);
  const Real nyquist = 0.5 * sample_rate;

  const Real lo = 50.0 + 1450.0 * u01(rng);
  const Real hi = std::min(0.95 * nyquist, lo + 300.0 + 3200.0 * u01(rng));
  const int taps = 129;
  const Vector h = datasim_detail::bandpass_fir(lo, hi, sample_rate, taps);
  Vector white(total + taps - 1);
  for (auto &v : white) v = gauss(rng);
  Vector x(total);
  for (Eigen::Index i = 0; i < total; ++i) x[i] = white.segment(i, taps).dot(h.reverse());

  const bool with_tone = u01(rng) < 0.5;
  const Real tone_hz = 150.0 + 2850.0 * std::min(u01(rng), 0.999);
  const Real am_hz = 0.5 + 7.5 * u01(rng);
  const Real tone_rel = 0.5 + 0.5 * u01(rng);
  const Real tone_phase = 2.0 * std::numbers::pi * u01(rng);
  const Real rms = std::sqrt(power(x));
  if (rms > 0.0) x /= rms;
  if (with_tone) {
    for (Eigen::Index i = 0; i < total; ++i) {
      const Real t = static_cast<Real>(i) / sample_rate;
      const Real am = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * am_hz * t);
      x[i] += tone_rel * std::sqrt(2.0) * am * std::sin(2.0 * std::numbers::pi * tone_hz * t + tone_phase);
    }
  }
  x *= kNoiseRms / std::sqrt(power(x));
  return Waveform(std::move(x), sample_rate);
}

// ---------------------------------------------------------------------------
// Corpus

enum class Split { kTrain = 0, kDev = 1, kEval = 2 };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kEval: return "eval";
  }
  return "?";
}

inline Split parse_split(const std::string &s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "eval") return Split::kEval;
  throw FormatError("unknown split '" + s + "'");
}

struct SnrRange {
  Real lo = -3.0;
  Real hi = 20.0;
  bool contains(Real v, Real tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
};

struct CorpusConfig {
  int n_train = 64;
  int n_dev = 16;
  int n_eval = 16;
  Real duration_s = 1.0;
  SnrRange snr_range_train{-3.0, 20.0};
  SnrRange snr_range_eval{0.0, 10.0};
  std::uint64_t master_seed = 1;
  int n_tokens = 8;
  int sample_rate = kDefaultSampleRate;
  int hop = 80;

  int count(Split s) const {
    return s == Split::kTrain ? n_train : s == Split::kDev ? n_dev : n_eval;
  }
  /// dev follows the training distribution; eval uses the narrower range.
  SnrRange range(Split s) const { return s == Split::kEval ? snr_range_eval : snr_range_train; }

  void validate() const {
    if (n_train < 1 || n_dev < 1 || n_eval < 1) throw ConfigError("corpus: counts must be >= 1");
    if (!(snr_range_train.lo <= snr_range_train.hi) || !(snr_range_eval.lo <= snr_range_eval.hi))
      throw ConfigError("corpus: snr range must satisfy lo <= hi");
    if (!std::isfinite(snr_range_train.lo) || !std::isfinite(snr_range_train.hi) ||
        !std::isfinite(snr_range_eval.lo) || !std::isfinite(snr_range_eval.hi))
      throw ConfigError("corpus: snr range must be finite");
    if (duration_s < 0.25) throw ConfigError("corpus: duration must be >= 0.25 s");
    if (n_tokens < 2) throw ConfigError("corpus: n_tokens must be >= 2");
    if (hop < 1 || sample_rate < 1) throw ConfigError("corpus: hop and sample_rate must be >= 1");
  }
};

struct CorpusItem {
  std::string id;
  Split split = Split::kTrain;
  Real snr_db = 0.0;  // measured on the stored 16-bit data
  Waveform mixture;
  Waveform source;
  std::vector<std::uint16_t> labels;
};

/// Generate one item in memory. Source and noise are snapped to the 16-bit
/// grid before mixing so the stored files reproduce snr_db exactly.
inline CorpusItem make_item(const CorpusConfig &cfg, Split split, int index) {
  const std::uint64_t item_seed = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(split) + 1,
                                              static_cast<std::uint64_t>(index));
  SourceOptions sopt;
  sopt.sample_rate = cfg.sample_rate;
  sopt.hop = cfg.hop;
  TokenSource src = gen_source(derive_seed(item_seed, 1), cfg.duration_s, cfg.n_tokens, sopt);
  const Waveform noise = gen_noise(derive_seed(item_seed, 2), cfg.duration_s, cfg.sample_rate);
  std::mt19937_64 rng(derive_seed(item_seed, 3));
  const SnrRange range = cfg.range(split);
  Real target = std::uniform_real_distribution<Real>(range.lo, range.hi)(rng);

  Vector source = quantize_pcm16(src.waveform.samples);
  for (int attempt = 0;; ++attempt) {
    const Mixture m = mix_at_snr(Waveform(source, cfg.sample_rate), noise, target);
    const Real peak = m.mixture.samples.cwiseAbs().maxCoeff();
    if (peak > 0.99) {
      source = quantize_pcm16(source * (0.95 / peak));
      continue;
    }
    const Vector scaled = quantize_pcm16(m.scaled_noise.samples);
    const Real measured = measured_snr(source, scaled);
    if (!range.contains(measured) && attempt < 16) {
      // Rounding pushed the item past an edge; pull the target inward.
      const Real inside = measured < range.lo ? range.lo + 1e-3 : range.hi - 1e-3;
      target = inside - (measured - target);
      continue;
    }
    CorpusItem item;
    char id[64];
    std::snprintf(id, sizeof(id), "%s_%05d", to_string(split).c_str(), index);
    item.id = id;
    item.split = split;
    item.snr_db = measured;
    item.source = Waveform(source, cfg.sample_rate);
    item.mixture = Waveform(source + scaled, cfg.sample_rate);
    item.labels = std::move(src.labels);
    return item;
  }
}

inline std::string encode_labels(const std::vector<std::uint16_t> &labels) {
  std::string out;
  out.reserve(labels.size() * 2);
  for (std::uint16_t v : labels) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
  }
  return out;
}

inline std::vector<std::uint16_t> decode_labels(const std::string &bytes) {
  if (bytes.size() % 2 != 0) throw FormatError("label file has odd length");
  std::vector<std::uint16_t> out(bytes.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[2 * i]) |
                                        (static_cast<unsigned char>(bytes[2 * i + 1]) << 8));
  return out;
}

inline constexpr const char *kManifestHeader = "id,split,snr_db,path_mixture,path_source,path_labels";

/// Writes <dir>/<split>/<id>_{mix,src}.wav, <id>_labels.u16 and
/// <dir>/manifest.csv (paths relative to dir). Returns the manifest path.
inline std::filesystem::path build_corpus(const CorpusConfig &cfg, const std::filesystem::path &dir) {
  namespace fs = std::filesystem;
  cfg.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::ostringstream manifest;
  manifest << kManifestHeader << "\n";
  for (Split split : {Split::kTrain, Split::kDev, Split::kEval}) {
    const std::string name = to_string(split);
    fs::create_directories(dir / name, ec);
    if (ec) throw IoError("cannot create " + (dir / name).string());
    for (int i = 0; i < cfg.count(split); ++i) {
      const CorpusItem item = make_item(cfg, split, i);
      const std::string mix = name + "/" + item.id + "_mix.wav";
      const std::string src = name + "/" + item.id + "_src.wav";
      const std::string lab = name + "/" + item.id + "_labels.u16";
      write_wav(dir / mix, item.mixture);
      write_wav(dir / src, item.source);
      write_file_bytes(dir / lab, encode_labels(item.labels));
      manifest << item.id << "," << name << "," << format_metric(item.snr_db) << "," << mix << ","
               << src << "," << lab << "\n";
    }
  }
  const fs::path path = dir / "manifest.csv";
  write_file_atomic(path, manifest.str());
  return path;
}

struct Corpus {
  std::vector<CorpusItem> items;

  std::vector<const CorpusItem *> split(Split s) const {
    std::vector<const CorpusItem *> out;
    for (const auto &it : items)
      if (it.split == s) out.push_back(&it);
    return out;
  }
};

inline std::vector<std::string> split_csv_line(const std::string &line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline Corpus load_corpus(const std::filesystem::path &dir) {
  const std::string text = read_file_bytes(dir / "manifest.csv");
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader)
    throw FormatError("manifest: unexpected header in " + (dir / "manifest.csv").string());
  Corpus corpus;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 6) throw FormatError("manifest: malformed row '" + line + "'");
    CorpusItem item;
    item.id = cells[0];
    item.split = parse_split(cells[1]);
    item.snr_db = std::stod(cells[2]);
    item.mixture = read_wav(dir / cells[3]);
    item.source = read_wav(dir / cells[4]);
    item.labels = decode_labels(read_file_bytes(dir / cells[5]));
    corpus.items.push_back(std::move(item));
  }
  return corpus;
}

/// Label of every encoder frame: the block containing the frame's centre
/// sample j*hop + kernel/2.
inline std::vector<int> frame_labels(const std::vector<std::uint16_t> &labels, Eigen::Index samples,
                                     Eigen::Index frames, int hop, int kernel) {
  if (static_cast<Eigen::Index>(labels.size()) != samples / hop)
    throw ShapeError("label/frame misalignment: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(samples) + " samples at hop " +
                     std::to_string(hop));
  std::vector<int> out(static_cast<std::size_t>(frames));
  for (Eigen::Index j = 0; j < frames; ++j) {
    const Eigen::Index idx = (j * hop + kernel / 2) / hop;
    if (idx >= static_cast<Eigen::Index>(labels.size()))
      throw ShapeError("label/frame misalignment: frame " + std::to_string(j) + " has no label");
    out[static_cast<std::size_t>(j)] = labels[static_cast<std::size_t>(idx)];
  }
  return out;
}

}  // namespace sslmse

#endif  // SSLMSE_DATASIM_HPP_
