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

#ifndef SSLMSE_WAV_HPP_
#define SSLMSE_WAV_HPP_

#include <array>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sslmse/signal.hpp"

namespace sslmse {

// Mono 16-bit PCM RIFF/WAVE. Samples map to [-1, 1) by 1/32768.

namespace wav_detail {

inline void put_u16(std::string &out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline void put_u32(std::string &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline std::uint16_t get_u16(const unsigned char *p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline std::uint32_t get_u32(const unsigned char *p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace wav_detail

/// Round to the nearest 16-bit word with saturation.
inline std::int16_t to_pcm16(Real v) {
  const Real s = std::nearbyint(v * 32768.0);
  if (s > 32767.0) return 32767;
  if (s < -32768.0) return -32768;
  return static_cast<std::int16_t>(s);
}

inline Real from_pcm16(std::int16_t w) { return static_cast<Real>(w) / 32768.0; }

/// Snap samples to the 16-bit grid so in-memory data matches what a
/// write/read cycle would produce.
inline Vector quantize_pcm16(const Vector &x) {
  Vector q(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) q[i] = from_pcm16(to_pcm16(x[i]));
  return q;
}

inline std::string encode_wav(const Waveform &w) {
  using namespace wav_detail;
  const auto n = static_cast<std::uint32_t>(w.size());
  std::string out;
  out.reserve(44 + 2 * n);
  out += "RIFF";
  put_u32(out, 36 + 2 * n);
  out += "WAVE";
  out += "fmt ";
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, 2 * n);
  for (Eigen::Index i = 0; i < w.size(); ++i)
    put_u16(out, static_cast<std::uint16_t>(to_pcm16(w.samples[i])));
  return out;
}

inline Waveform decode_wav(const std::string &bytes) {
  using namespace wav_detail;
  const auto *p = reinterpret_cast<const unsigned char *>(bytes.data());
  const std::size_t size = bytes.size();
  if (size < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    throw FormatError("wav: malformed header (missing RIFF/WAVE)");
  std::size_t pos = 12;
  bool have_fmt = false;
  int rate = 0;
  while (pos + 8 <= size) {
    const unsigned char *chunk = p + pos;
    const std::uint32_t len = get_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + len > size) throw FormatError("wav: truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16) throw FormatError("wav: malformed fmt chunk");
      const std::uint16_t format = get_u16(p + body);
      const std::uint16_t channels = get_u16(p + body + 2);
      rate = static_cast<int>(get_u32(p + body + 4));
      const std::uint16_t bits = get_u16(p + body + 14);
      if (format != 1) throw FormatError("wav: unsupported format (PCM only)");
      if (channels != 1)
        throw FormatError("wav: unsupported channels (" + std::to_string(channels) + ")");
      if (bits != 16)
        throw FormatError("wav: unsupported bit depth (" + std::to_string(bits) + ")");
      if (rate <= 0) throw FormatError("wav: malformed sample rate");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw FormatError("wav: data chunk before fmt chunk");
      if (len % 2 != 0) throw FormatError("wav: odd data length");
      Vector s(len / 2);
      for (std::uint32_t i = 0; i < len / 2; ++i)
        s[i] = from_pcm16(static_cast<std::int16_t>(get_u16(p + body + 2 * i)));
      return Waveform(std::move(s), rate);
    }
    pos = body + len + (len & 1u);
  }
  throw FormatError("wav: missing data chunk");
}

inline std::string read_file_bytes(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file_bytes(const std::filesystem::path &path, const std::string &bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write " + path.string());
}

/// Write to a sibling temp file, then rename over the target.
inline void write_file_atomic(const std::filesystem::path &path, const std::string &bytes) {
  auto tmp = path;
  tmp += ".tmp";
  write_file_bytes(tmp, bytes);
  std::filesystem::rename(tmp, path);
}

inline Waveform read_wav(const std::filesystem::path &path) {
  return decode_wav(read_file_bytes(path));
}

inline void write_wav(const std::filesystem::path &path, const Waveform &w) {
  w.validate();
  write_file_bytes(path, encode_wav(w));
}

}  // namespace sslmse

#endif  // SSLMSE_WAV_HPP_
