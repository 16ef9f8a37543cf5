// Copyright 2026 The grfsq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Finite scalar quantization of a single vector.
//
// Each dimension i is bounded with tanh and rounded to one of l_i values
// spaced uniformly on [-1, 1]:
//
//     v_i(k) = -1 + 2k / (l_i - 1),  k in [0, l_i)
//
// The product of the per-dimension grids is the implicit codebook. Codewords
// are enumerated in mixed radix with dimension 0 least significant.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "grfsq/error.hpp"

namespace grfsq {

using CodebookIndex = std::uint64_t;

class LevelSpec {
 public:
  LevelSpec() = default;

  explicit LevelSpec(std::vector<std::uint32_t> levels) : levels_(std::move(levels)) {
    detail::require(!levels_.empty(), ErrorCode::InvalidConfig, "level spec needs at least one dimension");
    std::uint64_t size = 1;
    for (std::uint32_t l : levels_) {
      detail::require(l >= 2, ErrorCode::InvalidConfig, "every level count must be >= 2");
      detail::require(size <= std::numeric_limits<std::uint64_t>::max() / l, ErrorCode::InvalidConfig,
                      "codebook size overflows 64 bits");
      size *= l;
    }
    size_ = size;
  }

  LevelSpec(std::initializer_list<std::uint32_t> levels)
      : LevelSpec(std::vector<std::uint32_t>(levels)) {}

  /// `count` dimensions with the same level count.
  static LevelSpec uniform(std::size_t count, std::uint32_t level) {
    return LevelSpec(std::vector<std::uint32_t>(count, level));
  }

  std::size_t dims() const noexcept { return levels_.size(); }
  std::uint32_t level(std::size_t i) const { return levels_.at(i); }
  const std::vector<std::uint32_t>& levels() const noexcept { return levels_; }
  std::uint64_t codebook_size() const noexcept { return size_; }

  bool operator==(const LevelSpec&) const = default;

 private:
  std::vector<std::uint32_t> levels_;
  std::uint64_t size_ = 0;
};

/// Per-dimension level indices k_i in [0, l_i).
struct CodePoint {
  std::vector<std::uint32_t> codes;
  bool operator==(const CodePoint&) const = default;
};

/// Grid values in [-1, 1], one per dimension.
struct Codeword {
  std::vector<double> values;
  bool operator==(const Codeword&) const = default;
};

struct Quantized {
  CodePoint codes;
  Codeword codeword;
};

inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

/// The single grid formula; every codeword value is produced here.
inline double grid_value(std::uint32_t code, std::uint32_t level) {
  return -1.0 + 2.0 * static_cast<double>(code) / static_cast<double>(level - 1);
}

namespace detail {

inline void require_finite(std::span<const double> z, const char* what) {
  for (double v : z) {
    require(std::isfinite(v), ErrorCode::InvalidInput, std::string(what) + " contains a non-finite value");
  }
}

inline void require_dims(std::size_t n, const LevelSpec& spec, const char* what) {
  require(n == spec.dims(), ErrorCode::InvalidInput,
          std::string(what) + " has " + std::to_string(n) + " dimensions, spec has " +
              std::to_string(spec.dims()));
}

inline void require_codes(const CodePoint& codes, const LevelSpec& spec) {
  require(codes.codes.size() == spec.dims(), ErrorCode::InvalidCode, "code point dimension mismatch");
  for (std::size_t i = 0; i < codes.codes.size(); ++i) {
    require(codes.codes[i] < spec.level(i), ErrorCode::InvalidCode,
            "code " + std::to_string(codes.codes[i]) + " out of range for dimension " + std::to_string(i));
  }
}

// Nearest grid level to an already bounded scalar; exact midpoints go up.
inline std::uint32_t nearest_level(double bounded, std::uint32_t level) {
  const double top = static_cast<double>(level - 1);
  const double u = (bounded + 1.0) * 0.5 * top;
  const auto base = static_cast<std::int64_t>(std::floor(u));
  std::uint32_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  // The analytic candidate is within one step; check neighbours so the
  // result agrees with a distance comparison on the grid formula itself.
  for (std::int64_t k = base - 1; k <= base + 2; ++k) {
    if (k < 0 || k > static_cast<std::int64_t>(level - 1)) continue;
    const double dist = std::abs(bounded - grid_value(static_cast<std::uint32_t>(k), level));
    if (dist <= best_dist) {
      best_dist = dist;
      best = static_cast<std::uint32_t>(k);
    }
  }
  return best;
}

}  // namespace detail

inline std::vector<double> bound(std::span<const double> z, const LevelSpec& spec) {
  detail::require_dims(z.size(), spec, "input");
  detail::require_finite(z, "input");
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::tanh(z[i]);
  return out;
}

inline Codeword fsq_dequantize(const CodePoint& codes, const LevelSpec& spec) {
  detail::require_codes(codes, spec);
  Codeword out;
  out.values.resize(codes.codes.size());
  for (std::size_t i = 0; i < codes.codes.size(); ++i) out.values[i] = grid_value(codes.codes[i], spec.level(i));
  return out;
}

inline Quantized fsq_quantize(std::span<const double> z, const LevelSpec& spec) {
  const std::vector<double> bounded = bound(z, spec);
  Quantized out;
  out.codes.codes.resize(bounded.size());
  out.codeword.values.resize(bounded.size());
  for (std::size_t i = 0; i < bounded.size(); ++i) {
    const std::uint32_t k = detail::nearest_level(bounded[i], spec.level(i));
    out.codes.codes[i] = k;
    out.codeword.values[i] = grid_value(k, spec.level(i));
  }
  return out;
}

inline CodebookIndex codes_to_index(const CodePoint& codes, const LevelSpec& spec) {
  detail::require_codes(codes, spec);
  CodebookIndex index = 0;
  CodebookIndex stride = 1;
  for (std::size_t i = 0; i < codes.codes.size(); ++i) {
    index += static_cast<CodebookIndex>(codes.codes[i]) * stride;
    stride *= spec.level(i);
  }
  return index;
}

inline CodePoint index_to_codes(CodebookIndex index, const LevelSpec& spec) {
  detail::require(index < spec.codebook_size(), ErrorCode::InvalidIndex,
                  "index " + std::to_string(index) + " >= codebook size " + std::to_string(spec.codebook_size()));
  CodePoint out;
  out.codes.resize(spec.dims());
  for (std::size_t i = 0; i < spec.dims(); ++i) {
    out.codes[i] = static_cast<std::uint32_t>(index % spec.level(i));
    index /= spec.level(i);
  }
  return out;
}

/// Straight-through backward pass: rounding is the identity, so only the
/// tanh derivative scales the upstream gradient.
inline std::vector<double> ste_gradient(std::span<const double> z, const LevelSpec& spec,
                                        std::span<const double> upstream) {
  detail::require_dims(z.size(), spec, "input");
  detail::require_dims(upstream.size(), spec, "upstream gradient");
  detail::require_finite(z, "input");
  detail::require_finite(upstream, "upstream gradient");
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double t = std::tanh(z[i]);
    out[i] = upstream[i] * (1.0 - t * t);
  }
  return out;
}

inline std::vector<Codeword> enumerate_codebook(const LevelSpec& spec,
                                                std::uint64_t cap = kDefaultEnumerationCap) {
  detail::require(spec.codebook_size() <= cap, ErrorCode::TooLarge,
                  "codebook size " + std::to_string(spec.codebook_size()) + " exceeds enumeration cap " +
                      std::to_string(cap));
  std::vector<Codeword> out;
  out.reserve(spec.codebook_size());
  for (CodebookIndex i = 0; i < spec.codebook_size(); ++i) out.push_back(fsq_dequantize(index_to_codes(i, spec), spec));
  return out;
}

}  // namespace grfsq
