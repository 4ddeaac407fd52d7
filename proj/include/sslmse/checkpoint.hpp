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

#ifndef SSLMSE_CHECKPOINT_HPP_
#define SSLMSE_CHECKPOINT_HPP_

// Binary checkpoint, little-endian throughout:
//
//   "SAE1" | u32 version | u32 tensor_count
//   tensor_count x { u16 name_len | name | u8 ndim | u32 dims[ndim] | f32 data (row-major) }
//   u32 scalar_count
//   scalar_count x { u16 name_len | name | f64 value }

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sslmse/semodel.hpp"
#include "sslmse/sslenc.hpp"
#include "sslmse/wav.hpp"

namespace sslmse {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

inline constexpr char kCheckpointMagic[4] = {'S', 'A', 'E', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

struct Checkpoint {
  std::vector<NamedTensor> tensors;
  std::vector<std::pair<std::string, double>> scalars;

  const NamedTensor *find(const std::string &name) const {
    for (const auto &t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
  std::optional<double> scalar(const std::string &name) const {
    for (const auto &[k, v] : scalars)
      if (k == name) return v;
    return std::nullopt;
  }
  void set_scalar(const std::string &name, double v) {
    for (auto &[k, old] : scalars)
      if (k == name) {
        old = v;
        return;
      }
    scalars.emplace_back(name, v);
  }
};

namespace ckpt_detail {

template <class T>
void put(std::string &out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

inline void put_name(std::string &out, const std::string &name) {
  if (name.size() > 0xffff) throw ValueError("checkpoint: name too long");
  put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
  out += name;
}

class Reader {
 public:
  explicit Reader(const std::string &bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string name() {
    const auto len = get<std::uint16_t>();
    need(len);
    std::string s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }
  void read_floats(std::vector<float> &out, std::size_t n) {
    if (n > (bytes_.size() - pos_) / sizeof(float)) throw FormatError("checkpoint: truncated file");
    out.resize(n);
    std::memcpy(out.data(), bytes_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("checkpoint: truncated file");
  }
  const std::string &bytes_;
  std::size_t pos_ = 0;
};

}  // namespace ckpt_detail

inline std::string encode_checkpoint(const Checkpoint &ck) {
  using namespace ckpt_detail;
  std::set<std::string> names;
  std::string out(kCheckpointMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto &t : ck.tensors) {
    if (!names.insert(t.name).second) throw ValueError("checkpoint: duplicate tensor name '" + t.name + "'");
    std::size_t count = 1;
    for (auto d : t.dims) count *= d;
    if (count != t.data.size()) throw ValueError("checkpoint: dims do not match data for '" + t.name + "'");
    if (t.dims.size() > 255) throw ValueError("checkpoint: too many dims");
    put_name(out, t.name);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) put<std::uint32_t>(out, d);
    out.append(reinterpret_cast<const char *>(t.data.data()), t.data.size() * sizeof(float));
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.scalars.size()));
  std::set<std::string> scalar_names;
  for (const auto &[k, v] : ck.scalars) {
    if (!scalar_names.insert(k).second) throw ValueError("checkpoint: duplicate scalar '" + k + "'");
    put_name(out, k);
    put<double>(out, v);
  }
  return out;
}

inline Checkpoint decode_checkpoint(const std::string &bytes) {
  using namespace ckpt_detail;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    throw FormatError("checkpoint: bad magic (expected SAE1), unsupported version");
  Reader r(bytes);
  r.get<std::uint32_t>();  // magic
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: version mismatch (file " + std::to_string(version) + ", expected " +
                      std::to_string(kCheckpointVersion) + ")");
  Checkpoint ck;
  std::set<std::string> names;
  const auto n_tensors = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    NamedTensor t;
    t.name = r.name();
    if (!names.insert(t.name).second) throw FormatError("checkpoint: duplicate tensor name '" + t.name + "'");
    const auto ndim = r.get<std::uint8_t>();
    std::size_t count = 1;
    for (int d = 0; d < ndim; ++d) {
      t.dims.push_back(r.get<std::uint32_t>());
      count *= t.dims.back();
    }
    r.read_floats(t.data, count);
    ck.tensors.push_back(std::move(t));
  }
  const auto n_scalars = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_scalars; ++i) {
    std::string k = r.name();
    ck.scalars.emplace_back(std::move(k), r.get<double>());
  }
  if (!r.at_end()) throw FormatError("checkpoint: trailing bytes");
  return ck;
}

inline void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ck) {
  write_file_atomic(path, encode_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path &path) {
  return decode_checkpoint(read_file_bytes(path));
}

// ---------------------------------------------------------------------------
// Parameter sets <-> checkpoints

template <class P>
void append_tensors(Checkpoint &ck, const P &params, const std::string &prefix = "") {
  params.for_each([&](const std::string &name, const Matrix &m) {
    NamedTensor t;
    t.name = prefix + name;
    t.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
    t.data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) t.data.push_back(static_cast<float>(m(i, j)));
    ck.tensors.push_back(std::move(t));
  });
}

/// Fills every tensor of params (already shaped) from the checkpoint.
template <class P>
void read_tensors(const Checkpoint &ck, P &params, const std::string &prefix = "") {
  params.for_each([&](const std::string &name, Matrix &m) {
    const NamedTensor *t = ck.find(prefix + name);
    if (!t) throw FormatError("checkpoint: missing tensor '" + prefix + name + "'");
    if (t->dims.size() != 2 || t->dims[0] != m.rows() || t->dims[1] != m.cols())
      throw ShapeError("checkpoint: tensor '" + prefix + name + "' has wrong shape");
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<Real>(t->data[k++]);
  });
}

inline double required_scalar(const Checkpoint &ck, const std::string &name) {
  auto v = ck.scalar(name);
  if (!v) throw FormatError("checkpoint: missing scalar '" + name + "'");
  return *v;
}

inline Checkpoint to_checkpoint(const SEParams &p) {
  Checkpoint ck;
  append_tensors(ck, p);
  const auto &c = p.config;
  ck.scalars = {{"se.basis", c.basis},   {"se.window", c.window}, {"se.bottleneck", c.bottleneck},
                {"se.repeats", c.repeats}, {"se.blocks", c.blocks}, {"se.hidden", c.hidden},
                {"se.kernel", c.kernel}};
  return ck;
}

inline SEParams se_from_checkpoint(const Checkpoint &ck) {
  SEConfig c;
  auto geti = [&](const char *k) { return static_cast<int>(required_scalar(ck, k)); };
  c.basis = geti("se.basis");
  c.window = geti("se.window");
  c.bottleneck = geti("se.bottleneck");
  c.repeats = geti("se.repeats");
  c.blocks = geti("se.blocks");
  c.hidden = geti("se.hidden");
  c.kernel = geti("se.kernel");
  SEParams p = init_se_model(c, 0);
  read_tensors(ck, p);
  return p;
}

inline Checkpoint to_checkpoint(const EncoderParams &p) {
  Checkpoint ck;
  append_tensors(ck, p);
  const auto &c = p.config;
  ck.scalars = {{"encoder.n_layers", c.n_layers},
                {"encoder.dim", c.dim},
                {"encoder.hop", c.hop},
                {"encoder.frontend_kernel", c.frontend_kernel},
                {"encoder.frontend_stride", c.frontend_stride},
                {"encoder.frontend_channels", c.frontend_channels},
                {"encoder.frontend_filter", c.frontend_filter},
                {"encoder.seed", static_cast<double>(c.seed)}};
  return ck;
}

inline EncoderParams encoder_from_checkpoint(const Checkpoint &ck) {
  EncoderConfig c;
  auto geti = [&](const char *k) { return static_cast<int>(required_scalar(ck, k)); };
  c.n_layers = geti("encoder.n_layers");
  c.dim = geti("encoder.dim");
  c.hop = geti("encoder.hop");
  c.frontend_kernel = geti("encoder.frontend_kernel");
  c.frontend_stride = geti("encoder.frontend_stride");
  c.frontend_channels = geti("encoder.frontend_channels");
  c.frontend_filter = geti("encoder.frontend_filter");
  c.seed = static_cast<std::uint64_t>(required_scalar(ck, "encoder.seed"));
  EncoderParams p = init_frozen_encoder(c);
  read_tensors(ck, p);
  return p;
}

// ---------------------------------------------------------------------------
// Checksums

inline std::string sha256_hex(const std::string &bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static const char *hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

/// SHA-256 over names and raw 64-bit values of every tensor; detects any
/// in-memory change, including ones below float resolution.
template <class P>
std::string params_sha256(const P &params) {
  std::string buf;
  params.for_each([&](const std::string &name, const Matrix &m) {
    buf += name;
    buf.push_back('\0');
    buf.append(reinterpret_cast<const char *>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(Real));
  });
  return sha256_hex(buf);
}

}  // namespace sslmse

#endif  // SSLMSE_CHECKPOINT_HPP_
