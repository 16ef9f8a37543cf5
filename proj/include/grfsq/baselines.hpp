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

// Explicit-codebook quantizers (VQ, GVQ, RVQ, GRVQ) fitted with k-means.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grfsq/error.hpp"
#include "grfsq/grfsq.hpp"

namespace grfsq {

struct Codebook {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<double> entries;  // k x dim, row-major

  std::span<const double> entry(std::size_t i) const {
    return std::span<const double>(entries).subspan(i * dim, dim);
  }

  bool operator==(const Codebook&) const = default;
};

struct KMeansFit {
  Codebook codebook;
  std::vector<double> objective;  // total squared distortion after each assignment step
  std::size_t iterations = 0;
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = a[i] - b[i];
    acc += e * e;
  }
  return acc;
}

struct Nearest {
  std::size_t index = 0;
  double distance = 0.0;
};

// Exhaustive L2 search, lowest index on ties. The partial sum only grows, so
// abandoning a candidate once it exceeds the best cannot change the answer.
inline Nearest nearest_entry(const Codebook& cb, std::span<const double> x) {
  Nearest best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t c = 0; c < cb.k; ++c) {
    const double* e = cb.entries.data() + c * cb.dim;
    double acc = 0.0;
    std::size_t i = 0;
    for (; i < cb.dim; ++i) {
      const double diff = x[i] - e[i];
      acc += diff * diff;
      if (acc > best.distance) break;
    }
    if (i == cb.dim && acc < best.distance) best = Nearest{c, acc};
  }
  return best;
}

// Flat row-major point set used while fitting.
struct PointSet {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  std::span<const double> point(std::size_t i) const {
    return std::span<const double>(values).subspan(i * dim, dim);
  }
};

inline KMeansFit kmeans_fit_points(const PointSet& data, std::size_t k, std::size_t iters, std::uint64_t seed) {
  require(data.n >= 1, ErrorCode::InvalidConfig, "k-means needs at least one point");
  require(k >= 1, ErrorCode::InvalidConfig, "k must be >= 1");
  require(k <= data.n, ErrorCode::InvalidConfig,
          "k = " + std::to_string(k) + " exceeds the number of points " + std::to_string(data.n));
  for (double v : data.values) require(std::isfinite(v), ErrorCode::InvalidInput, "training data is not finite");

  const std::size_t n = data.n;
  const std::size_t dim = data.dim;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  KMeansFit fit;
  Codebook& cb = fit.codebook;
  cb.k = k;
  cb.dim = dim;
  cb.entries.assign(k * dim, 0.0);

  // k-means++ seeding.
  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  std::size_t chosen = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (double v : min_dist) total += v;
      if (total > 0.0) {
        const double target = unit(rng) * total;
        double acc = 0.0;
        chosen = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          acc += min_dist[i];
          if (acc > target && min_dist[i] > 0.0) {
            chosen = i;
            break;
          }
        }
      } else {
        chosen = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
      }
    }
    std::copy_n(data.values.begin() + static_cast<std::ptrdiff_t>(chosen * dim), dim,
                cb.entries.begin() + static_cast<std::ptrdiff_t>(c * dim));
    const auto centre = cb.entry(c);
    for (std::size_t i = 0; i < n; ++i) min_dist[i] = std::min(min_dist[i], squared_distance(data.point(i), centre));
  }

  // Lloyd iterations.
  std::vector<std::size_t> assign(n, std::numeric_limits<std::size_t>::max());
  std::vector<double> dist(n, 0.0);
  std::vector<double> sums(k * dim);
  std::vector<std::size_t> counts(k);
  for (std::size_t it = 0; it <= iters; ++it) {
    bool changed = false;
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Nearest near = nearest_entry(cb, data.point(i));
      if (near.index != assign[i]) changed = true;
      assign[i] = near.index;
      dist[i] = near.distance;
      objective += near.distance;
    }
    fit.objective.push_back(objective);
    if (!changed || it == iters) break;
    ++fit.iterations;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      const auto p = data.point(i);
      for (std::size_t j = 0; j < dim; ++j) sums[assign[i] * dim + j] += p[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < dim; ++j) {
        cb.entries[c * dim + j] = sums[c * dim + j] / static_cast<double>(counts[c]);
      }
    }
    // Empty clusters take the point currently farthest from its centroid.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
      std::copy_n(data.values.begin() + static_cast<std::ptrdiff_t>(far * dim), dim,
                  cb.entries.begin() + static_cast<std::ptrdiff_t>(c * dim));
      dist[far] = 0.0;
    }
  }
  return fit;
}

inline PointSet slice_points(const FrameSeq& frames, std::size_t offset, std::size_t dim) {
  PointSet out{frames.size(), dim, {}};
  out.values.reserve(frames.size() * dim);
  for (const Frame& f : frames) out.values.insert(out.values.end(), f.begin() + static_cast<std::ptrdiff_t>(offset),
                                                  f.begin() + static_cast<std::ptrdiff_t>(offset + dim));
  return out;
}

// Stage seeds depend only on (seed, group, residual) so the (0, 0) stage of
// every scheme is fitted identically.
inline std::uint64_t stage_seed(std::uint64_t seed, std::size_t group, std::size_t residual) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(group), static_cast<std::uint32_t>(residual)};
  std::uint64_t out = 0;
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  out = (static_cast<std::uint64_t>(words[1]) << 32) | words[0];
  return out;
}

}  // namespace detail

inline KMeansFit kmeans_fit(const FrameSeq& data, std::size_t k, std::size_t iters, std::uint64_t seed) {
  detail::require(!data.empty(), ErrorCode::InvalidConfig, "k-means needs at least one point");
  const std::size_t dim = data.front().size();
  for (const Frame& f : data) detail::require(f.size() == dim, ErrorCode::InvalidInput, "ragged training data");
  return detail::kmeans_fit_points(detail::slice_points(data, 0, dim), k, iters, seed);
}

enum class Scheme { VQ, GVQ, RVQ, GRVQ };

constexpr std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::VQ: return "VQ";
    case Scheme::GVQ: return "GVQ";
    case Scheme::RVQ: return "RVQ";
    case Scheme::GRVQ: return "GRVQ";
  }
  return "?";
}

struct BaselineConfig {
  Scheme scheme = Scheme::VQ;
  std::size_t k = 8196;
  std::size_t groups = 1;
  std::size_t residuals = 1;
  std::size_t kmeans_iters = 20;
  std::uint64_t seed = 0;

  void validate() const {
    detail::require(k >= 1 && groups >= 1 && residuals >= 1, ErrorCode::InvalidConfig,
                    "k, groups and residuals must be >= 1");
    const bool grouped = scheme == Scheme::GVQ || scheme == Scheme::GRVQ;
    const bool residual = scheme == Scheme::RVQ || scheme == Scheme::GRVQ;
    detail::require(grouped || groups == 1, ErrorCode::InvalidConfig,
                    std::string(to_string(scheme)) + " uses a single group");
    detail::require(residual || residuals == 1, ErrorCode::InvalidConfig,
                    std::string(to_string(scheme)) + " uses a single residual stage");
  }
};

/// Fitted codebooks, one per (group, residual) stage.
struct BaselineModel {
  BaselineConfig config;
  std::size_t total_dim = 0;
  std::size_t group_dim = 0;
  std::vector<Codebook> codebooks;  // group-major, residual-minor

  const Codebook& codebook(std::size_t g, std::size_t r) const { return codebooks.at(g * config.residuals + r); }
};

struct BaselineEncoding {
  IndexTensor indices;
  FrameSeq reconstructions;
};

/// Stage (g, r) is fitted on the residuals left by stages (g, 0..r-1) on the
/// same training data.
inline BaselineModel fit_baseline(const FrameSeq& train, const BaselineConfig& cfg) {
  cfg.validate();
  detail::require(!train.empty(), ErrorCode::InvalidConfig, "no training frames");
  const std::size_t D = train.front().size();
  for (const Frame& f : train) detail::require(f.size() == D, ErrorCode::InvalidInput, "ragged training data");
  detail::require(D % cfg.groups == 0, ErrorCode::InvalidConfig,
                  "dimension " + std::to_string(D) + " is not divisible by " + std::to_string(cfg.groups) + " groups");

  BaselineModel model{cfg, D, D / cfg.groups, {}};
  model.codebooks.reserve(cfg.groups * cfg.residuals);
  for (std::size_t g = 0; g < cfg.groups; ++g) {
    detail::PointSet residual = detail::slice_points(train, g * model.group_dim, model.group_dim);
    for (std::size_t r = 0; r < cfg.residuals; ++r) {
      KMeansFit fit = detail::kmeans_fit_points(residual, cfg.k, cfg.kmeans_iters, detail::stage_seed(cfg.seed, g, r));
      if (r + 1 < cfg.residuals) {
        for (std::size_t i = 0; i < residual.n; ++i) {
          const auto near = detail::nearest_entry(fit.codebook, residual.point(i));
          const auto c = fit.codebook.entry(near.index);
          for (std::size_t j = 0; j < residual.dim; ++j) residual.values[i * residual.dim + j] -= c[j];
        }
      }
      model.codebooks.push_back(std::move(fit.codebook));
    }
  }
  return model;
}

inline BaselineEncoding baseline_encode(const FrameSeq& frames, const BaselineModel& model) {
  const BaselineConfig& cfg = model.config;
  detail::require(model.codebooks.size() == cfg.groups * cfg.residuals, ErrorCode::ConfigMismatch,
                  "model has the wrong number of codebooks");
  for (const Codebook& cb : model.codebooks) {
    detail::require(cb.dim == model.group_dim, ErrorCode::ConfigMismatch, "codebook dimension mismatch");
  }
  BaselineEncoding out;
  out.indices = IndexTensor(frames.size(), cfg.groups, cfg.residuals);
  out.reconstructions.resize(frames.size());
  std::vector<double> residual(model.group_dim);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    detail::require(frames[t].size() == model.total_dim, ErrorCode::ConfigMismatch,
                    "frame " + std::to_string(t) + " has the wrong dimension");
    Frame recon(model.total_dim, 0.0);
    for (std::size_t g = 0; g < cfg.groups; ++g) {
      const std::size_t off = g * model.group_dim;
      std::copy_n(frames[t].begin() + static_cast<std::ptrdiff_t>(off), model.group_dim, residual.begin());
      for (std::size_t r = 0; r < cfg.residuals; ++r) {
        const Codebook& cb = model.codebook(g, r);
        const auto near = detail::nearest_entry(cb, residual);
        const auto c = cb.entry(near.index);
        for (std::size_t j = 0; j < model.group_dim; ++j) {
          recon[off + j] += c[j];
          residual[j] -= c[j];
        }
        out.indices.at(t, g, r) = near.index;
      }
    }
    out.reconstructions[t] = std::move(recon);
  }
  return out;
}

inline UtilizationReport baseline_utilization(const IndexTensor& tokens, const BaselineConfig& cfg) {
  detail::require(tokens.empty() || (tokens.groups() == cfg.groups && tokens.residuals() == cfg.residuals),
                  ErrorCode::ConfigMismatch, "token tensor shape does not match baseline config");
  return codebook_utilization(tokens, cfg.k);
}

/// groups * residuals * log2(k) * fps
inline double baseline_bitrate(const BaselineConfig& cfg, double fps) {
  detail::require(std::isfinite(fps) && fps > 0.0, ErrorCode::InvalidInput, "fps must be positive");
  return static_cast<double>(cfg.groups * cfg.residuals) * std::log2(static_cast<double>(cfg.k)) * fps;
}

// Codebook blob: u32 k, u32 dim, then k*dim f32, all little-endian.
inline void save_codebook(const Codebook& cb, std::ostream& out) {
  auto put_u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  detail::require(cb.k <= 0xFFFFFFFFu && cb.dim <= 0xFFFFFFFFu, ErrorCode::InvalidConfig, "codebook too large");
  put_u32(static_cast<std::uint32_t>(cb.k));
  put_u32(static_cast<std::uint32_t>(cb.dim));
  for (double v : cb.entries) put_u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  detail::require(static_cast<bool>(out), ErrorCode::Io, "codebook write failed");
}

inline Codebook load_codebook(std::istream& in) {
  auto get_u32 = [&]() {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    detail::require(in.gcount() == 4, ErrorCode::CorruptStream, "truncated codebook");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  };
  Codebook cb;
  cb.k = get_u32();
  cb.dim = get_u32();
  detail::require(cb.k >= 1 && cb.dim >= 1, ErrorCode::CorruptStream, "empty codebook header");
  cb.entries.reserve(std::min<std::size_t>(cb.k * cb.dim, 1u << 24));
  for (std::size_t i = 0; i < cb.k * cb.dim; ++i) {
    const double v = static_cast<double>(std::bit_cast<float>(get_u32()));
    detail::require(std::isfinite(v), ErrorCode::CorruptStream, "non-finite codebook entry");
    cb.entries.push_back(v);
  }
  return cb;
}

}  // namespace grfsq
