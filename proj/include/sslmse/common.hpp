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

#ifndef SSLMSE_COMMON_HPP_
#define SSLMSE_COMMON_HPP_

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace sslmse {

using Real = double;
// Channels x frames; each column is one frame.
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using RowVector = Eigen::Matrix<Real, 1, Eigen::Dynamic>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input shapes or lengths do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A value outside the domain of an operation (zero power, bad range, ...).
class ValueError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed or unsupported file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Loss or gradient became NaN/Inf during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

namespace detail {
inline void require(bool cond, const std::string &what) {
  if (!cond) throw ValueError(what);
}
inline void require_shape(bool cond, const std::string &what) {
  if (!cond) throw ShapeError(what);
}
}  // namespace detail

/// SplitMix64 finalizer. Used as a counter-based hash to derive independent
/// seeds from (master, stream, index) tuples.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  return mix64(mix64(mix64(master) ^ stream) ^ (index * 0x2545f4914f6cdd1dULL));
}

/// Shortest decimal that parses back to exactly `v`.
inline std::string format_real(Real v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Metric text for CSV/report output, 10 significant digits.
inline std::string format_metric(Real v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline bool all_finite(const Matrix &m) { return m.allFinite(); }

}  // namespace sslmse

#endif  // SSLMSE_COMMON_HPP_
