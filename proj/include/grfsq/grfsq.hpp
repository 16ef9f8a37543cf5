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

// Group residual finite scalar quantization.
//
// A D-dimensional frame is split into G contiguous groups of d_g values.
// Each group runs R residual steps; step r quantizes the current residual
// with FSQ and subtracts the quantized value before the next step:
//
//     residual <- x_g
//     for r in 0..R-1:
//         z      = down(residual) * gain_r
//         q      = up(fsq(z) / gain_r)
//         x_hat += q;  residual -= q
//
// gain_r = (l_i - 1)^r per FSQ dimension, so every layer sees its residual at
// roughly the full [-1, 1] range of the grid. Layer 0 has unit gain.
//
// When d_g is larger than the FSQ dimension d, down/up are a d x d_g
// projection with orthonormal rows and its transpose. Without calibration the
// projection keeps the first d coordinates of the group.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "grfsq/error.hpp"
#include "grfsq/fsq.hpp"

namespace grfsq {

using Frame = std::vector<double>;
using FrameSeq = std::vector<Frame>;

/// d x d_g row-major map from group space to FSQ space.
struct Projection {
  std::size_t out_dim = 0;
  std::size_t in_dim = 0;
  std::vector<double> down;

  double at(std::size_t row, std::size_t col) const { return down[row * in_dim + col]; }

  static Projection coordinate(std::size_t out_dim, std::size_t in_dim) {
    Projection p{out_dim, in_dim, std::vector<double>(out_dim * in_dim, 0.0)};
    for (std::size_t i = 0; i < out_dim; ++i) p.down[i * in_dim + i] = 1.0;
    return p;
  }

  bool operator==(const Projection&) const = default;
};

class GrfsqConfig {
 public:
  static GrfsqConfig make(std::size_t num_groups, std::size_t num_residuals, LevelSpec levels,
                          std::size_t total_dim) {
    GrfsqConfig cfg;
    detail::require(num_groups >= 1, ErrorCode::InvalidConfig, "need at least one group");
    detail::require(num_residuals >= 1, ErrorCode::InvalidConfig, "need at least one residual layer");
    detail::require(levels.dims() >= 1, ErrorCode::InvalidConfig, "level spec is empty");
    detail::require(total_dim % num_groups == 0, ErrorCode::InvalidConfig,
                    "total dimension " + std::to_string(total_dim) + " is not divisible by " +
                        std::to_string(num_groups) + " groups");
    const std::size_t group_dim = total_dim / num_groups;
    detail::require(group_dim >= levels.dims(), ErrorCode::InvalidConfig,
                    "group dimension " + std::to_string(group_dim) + " is smaller than the FSQ dimension " +
                        std::to_string(levels.dims()));
    cfg.groups_ = num_groups;
    cfg.residuals_ = num_residuals;
    cfg.levels_ = std::move(levels);
    cfg.group_dim_ = group_dim;
    if (group_dim > cfg.levels_.dims()) {
      cfg.projections_.assign(num_groups, Projection::coordinate(cfg.levels_.dims(), group_dim));
    }
    cfg.compute_gains();
    return cfg;
  }

  /// 12 groups, 4 residual layers, 5x5x5x5 levels, 120 dimensions.
  static GrfsqConfig reference() { return make(12, 4, LevelSpec::uniform(4, 5), 120); }

  /// Replaces the per-group projections with calibrated ones.
  GrfsqConfig with_projections(std::vector<Projection> projections) const {
    detail::require(projected(), ErrorCode::InvalidConfig, "projections need group_dim > FSQ dimension");
    detail::require(projections.size() == groups_, ErrorCode::ConfigMismatch, "one projection per group required");
    for (const Projection& p : projections) {
      detail::require(p.out_dim == levels_.dims() && p.in_dim == group_dim_ &&
                          p.down.size() == p.out_dim * p.in_dim,
                      ErrorCode::ConfigMismatch, "projection shape does not match config");
      for (std::size_t a = 0; a < p.out_dim; ++a) {
        for (std::size_t b = 0; b < p.out_dim; ++b) {
          double dot = 0.0;
          for (std::size_t j = 0; j < p.in_dim; ++j) dot += p.at(a, j) * p.at(b, j);
          detail::require(std::isfinite(dot) && std::abs(dot - (a == b ? 1.0 : 0.0)) < 1e-5,
                          ErrorCode::ConfigMismatch, "projection rows are not orthonormal");
        }
      }
    }
    GrfsqConfig cfg = *this;
    cfg.projections_ = std::move(projections);
    cfg.calibrated_ = true;
    return cfg;
  }

  std::size_t num_groups() const noexcept { return groups_; }
  std::size_t num_residuals() const noexcept { return residuals_; }
  const LevelSpec& levels() const noexcept { return levels_; }
  std::size_t group_dim() const noexcept { return group_dim_; }
  std::size_t total_dim() const noexcept { return groups_ * group_dim_; }
  std::uint64_t codebook_size() const noexcept { return levels_.codebook_size(); }
  std::size_t indices_per_frame() const noexcept { return groups_ * residuals_; }

  bool projected() const noexcept { return !projections_.empty(); }
  bool calibrated() const noexcept { return calibrated_; }
  const Projection& projection(std::size_t group) const { return projections_.at(group); }
  const std::vector<Projection>& projections() const noexcept { return projections_; }

  double layer_gain(std::size_t residual, std::size_t dim) const { return gains_[residual * levels_.dims() + dim]; }

  bool operator==(const GrfsqConfig&) const = default;

 private:
  void compute_gains() {
    gains_.assign(residuals_ * levels_.dims(), 1.0);
    for (std::size_t r = 0; r < residuals_; ++r) {
      for (std::size_t i = 0; i < levels_.dims(); ++i) {
        double g = 1.0;
        for (std::size_t k = 0; k < r; ++k) g *= static_cast<double>(levels_.level(i) - 1);
        gains_[r * levels_.dims() + i] = g;
      }
    }
  }

  std::size_t groups_ = 0;
  std::size_t residuals_ = 0;
  LevelSpec levels_;
  std::size_t group_dim_ = 0;
  std::vector<Projection> projections_;
  bool calibrated_ = false;
  std::vector<double> gains_;
};

/// Codeword indices of shape (frames, groups, residuals), residual fastest.
class IndexTensor {
 public:
  IndexTensor() = default;
  IndexTensor(std::size_t frames, std::size_t groups, std::size_t residuals)
      : frames_(frames), groups_(groups), residuals_(residuals), data_(frames * groups * residuals, 0) {}

  std::size_t frames() const noexcept { return frames_; }
  std::size_t groups() const noexcept { return groups_; }
  std::size_t residuals() const noexcept { return residuals_; }
  bool empty() const noexcept { return data_.empty(); }

  CodebookIndex& at(std::size_t t, std::size_t g, std::size_t r) { return data_[offset(t, g, r)]; }
  CodebookIndex at(std::size_t t, std::size_t g, std::size_t r) const { return data_[offset(t, g, r)]; }

  std::span<CodebookIndex> frame(std::size_t t) {
    return std::span<CodebookIndex>(data_).subspan(t * groups_ * residuals_, groups_ * residuals_);
  }
  std::span<const CodebookIndex> frame(std::size_t t) const {
    return std::span<const CodebookIndex>(data_).subspan(t * groups_ * residuals_, groups_ * residuals_);
  }

  void push_frame(std::span<const CodebookIndex> row) {
    detail::require(row.size() == groups_ * residuals_, ErrorCode::InvalidInput, "frame row has the wrong length");
    data_.insert(data_.end(), row.begin(), row.end());
    ++frames_;
  }

  const std::vector<CodebookIndex>& data() const noexcept { return data_; }
  std::vector<CodebookIndex>& data() noexcept { return data_; }

  bool operator==(const IndexTensor&) const = default;

 private:
  std::size_t offset(std::size_t t, std::size_t g, std::size_t r) const {
    return (t * groups_ + g) * residuals_ + r;
  }

  std::size_t frames_ = 0;
  std::size_t groups_ = 0;
  std::size_t residuals_ = 0;
  std::vector<CodebookIndex> data_;
};

struct FrameQuantization {
  Frame x_hat;
  std::vector<CodebookIndex> indices;  // group-major, residual-minor
};

struct ReconstructionReport {
  std::vector<double> per_frame_rmse;
  std::vector<double> cumulative_rmse_by_residual;
  double mean_rmse = 0.0;
};

struct SequenceQuantization {
  IndexTensor indices;
  FrameSeq reconstructions;
  ReconstructionReport report;
};

struct UtilizationReport {
  std::vector<double> per_codebook_percent;  // group-major, residual-minor
  double mean_percent = 0.0;
  bool empty_input = false;
};

namespace detail {

inline void project_down(const GrfsqConfig& cfg, std::size_t g, std::span<const double> residual,
                         std::span<double> out) {
  if (!cfg.projected()) {
    std::copy(residual.begin(), residual.end(), out.begin());
    return;
  }
  const Projection& p = cfg.projection(g);
  for (std::size_t i = 0; i < p.out_dim; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < p.in_dim; ++j) acc += p.at(i, j) * residual[j];
    out[i] = acc;
  }
}

// Group-space contribution of one layer's codeword. Shared by the encoder and
// decoder so both produce bit-identical reconstructions.
inline void layer_contribution(const GrfsqConfig& cfg, std::size_t g, std::size_t r, const Codeword& cw,
                               std::span<double> out) {
  const std::size_t d = cfg.levels().dims();
  std::vector<double> scaled(d);
  for (std::size_t i = 0; i < d; ++i) scaled[i] = cw.values[i] / cfg.layer_gain(r, i);
  if (!cfg.projected()) {
    std::copy(scaled.begin(), scaled.end(), out.begin());
    return;
  }
  const Projection& p = cfg.projection(g);
  for (std::size_t j = 0; j < p.in_dim; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.out_dim; ++i) acc += p.at(i, j) * scaled[i];
    out[j] = acc;
  }
}

inline double rmse(std::span<const double> a, std::span<const double> b) {
  if (a.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = a[i] - b[i];
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

}  // namespace detail

inline FrameQuantization grfsq_quantize(std::span<const double> x, const GrfsqConfig& cfg) {
  detail::require(x.size() == cfg.total_dim(), ErrorCode::ConfigMismatch,
                  "frame has " + std::to_string(x.size()) + " values, config expects " +
                      std::to_string(cfg.total_dim()));
  detail::require_finite(x, "frame");

  const std::size_t dg = cfg.group_dim();
  const std::size_t d = cfg.levels().dims();
  FrameQuantization out;
  out.x_hat.assign(x.size(), 0.0);
  out.indices.resize(cfg.indices_per_frame());

  std::vector<double> residual(dg), z(d), q(dg);
  for (std::size_t g = 0; g < cfg.num_groups(); ++g) {
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(g * dg), dg, residual.begin());
    std::span<double> x_hat_g(out.x_hat.data() + g * dg, dg);
    for (std::size_t r = 0; r < cfg.num_residuals(); ++r) {
      detail::project_down(cfg, g, residual, z);
      for (std::size_t i = 0; i < d; ++i) z[i] *= cfg.layer_gain(r, i);
      const Quantized fq = fsq_quantize(z, cfg.levels());
      detail::layer_contribution(cfg, g, r, fq.codeword, q);
      for (std::size_t j = 0; j < dg; ++j) {
        x_hat_g[j] += q[j];
        residual[j] -= q[j];
      }
      out.indices[g * cfg.num_residuals() + r] = codes_to_index(fq.codes, cfg.levels());
    }
  }
  return out;
}

/// Reconstruction from the first `layers` residual layers (all by default).
inline Frame grfsq_dequantize(std::span<const CodebookIndex> indices, const GrfsqConfig& cfg,
                              std::optional<std::size_t> layers = std::nullopt) {
  detail::require(indices.size() == cfg.indices_per_frame(), ErrorCode::ConfigMismatch,
                  "expected " + std::to_string(cfg.indices_per_frame()) + " indices per frame");
  const std::size_t use = std::min(layers.value_or(cfg.num_residuals()), cfg.num_residuals());
  const std::size_t dg = cfg.group_dim();
  Frame out(cfg.total_dim(), 0.0);
  std::vector<double> q(dg);
  for (std::size_t g = 0; g < cfg.num_groups(); ++g) {
    for (std::size_t r = 0; r < use; ++r) {
      const CodebookIndex idx = indices[g * cfg.num_residuals() + r];
      const Codeword cw = fsq_dequantize(index_to_codes(idx, cfg.levels()), cfg.levels());
      detail::layer_contribution(cfg, g, r, cw, q);
      for (std::size_t j = 0; j < dg; ++j) out[g * dg + j] += q[j];
    }
  }
  return out;
}

/// Frame-wise quantization. Work is split into contiguous frame ranges across
/// `threads` workers; each frame is computed independently, so the result does
/// not depend on the thread count.
inline SequenceQuantization quantize_sequence(const FrameSeq& frames, const GrfsqConfig& cfg,
                                              std::size_t threads = 1) {
  for (std::size_t t = 0; t < frames.size(); ++t) {
    detail::require(frames[t].size() == cfg.total_dim(), ErrorCode::InvalidInput,
                    "frame " + std::to_string(t) + " has " + std::to_string(frames[t].size()) +
                        " values, expected " + std::to_string(cfg.total_dim()));
  }
  const std::size_t T = frames.size();
  const std::size_t R = cfg.num_residuals();
  SequenceQuantization out;
  out.indices = IndexTensor(T, cfg.num_groups(), R);
  out.reconstructions.resize(T);
  out.report.per_frame_rmse.assign(T, 0.0);
  out.report.cumulative_rmse_by_residual.assign(R, 0.0);
  std::vector<double> cumulative(T * R, 0.0);

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      FrameQuantization fq = grfsq_quantize(frames[t], cfg);
      std::copy(fq.indices.begin(), fq.indices.end(), out.indices.frame(t).begin());
      for (std::size_t r = 0; r + 1 < R; ++r) {
        cumulative[t * R + r] = detail::rmse(frames[t], grfsq_dequantize(fq.indices, cfg, r + 1));
      }
      const double full = detail::rmse(frames[t], fq.x_hat);
      cumulative[t * R + R - 1] = full;
      out.report.per_frame_rmse[t] = full;
      out.reconstructions[t] = std::move(fq.x_hat);
    }
  };

  threads = std::max<std::size_t>(1, std::min(threads, T));
  if (threads == 1) {
    work(0, T);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (T + threads - 1) / threads;
    for (std::size_t w = 0; w < threads; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(T, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(work, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  // Reductions run serially in frame order.
  if (T > 0) {
    double sum = 0.0;
    for (double v : out.report.per_frame_rmse) sum += v;
    out.report.mean_rmse = sum / static_cast<double>(T);
    for (std::size_t r = 0; r < R; ++r) {
      double acc = 0.0;
      for (std::size_t t = 0; t < T; ++t) acc += cumulative[t * R + r];
      out.report.cumulative_rmse_by_residual[r] = acc / static_cast<double>(T);
    }
  }
  return out;
}

/// Per-group PCA: keeps the top-d principal axes of each group's slice.
/// Axes are rounded to float precision so they survive serialization
/// bit-exactly, and each is signed so its largest-magnitude entry is positive.
inline GrfsqConfig calibrate_projections(const FrameSeq& calibration, const GrfsqConfig& cfg) {
  const std::size_t d = cfg.levels().dims();
  const std::size_t dg = cfg.group_dim();
  if (dg == d) return cfg;
  const std::size_t n = calibration.size();
  detail::require(n >= d, ErrorCode::DegenerateCalibration,
                  "need at least " + std::to_string(d) + " calibration frames, got " + std::to_string(n));
  for (std::size_t t = 0; t < n; ++t) {
    detail::require(calibration[t].size() == cfg.total_dim(), ErrorCode::InvalidInput,
                    "calibration frame " + std::to_string(t) + " has the wrong dimension");
    detail::require_finite(calibration[t], "calibration frame");
  }

  std::vector<Projection> projections;
  projections.reserve(cfg.num_groups());
  for (std::size_t g = 0; g < cfg.num_groups(); ++g) {
    Eigen::MatrixXd slice(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dg));
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t j = 0; j < dg; ++j) slice(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = calibration[t][g * dg + j];
    }
    const Eigen::RowVectorXd mean = slice.colwise().mean();
    const Eigen::MatrixXd centered = slice.rowwise() - mean;
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    detail::require(solver.info() == Eigen::Success, ErrorCode::DegenerateCalibration, "eigen decomposition failed");
    const Eigen::VectorXd& values = solver.eigenvalues();  // ascending
    const Eigen::MatrixXd& vectors = solver.eigenvectors();
    const double largest = std::max(values(static_cast<Eigen::Index>(dg - 1)), 0.0);
    const double kth = values(static_cast<Eigen::Index>(dg - d));
    detail::require(largest > 0.0 && kth > 1e-12 * largest, ErrorCode::DegenerateCalibration,
                    "group " + std::to_string(g) + " covariance has rank below " + std::to_string(d));

    Projection p{d, dg, std::vector<double>(d * dg)};
    for (std::size_t i = 0; i < d; ++i) {
      const Eigen::VectorXd axis = vectors.col(static_cast<Eigen::Index>(dg - 1 - i));
      Eigen::Index pivot = 0;
      for (Eigen::Index j = 1; j < axis.size(); ++j) {
        if (std::abs(axis(j)) > std::abs(axis(pivot))) pivot = j;
      }
      const double sign = axis(pivot) < 0.0 ? -1.0 : 1.0;
      for (std::size_t j = 0; j < dg; ++j) {
        p.down[i * dg + j] = static_cast<double>(static_cast<float>(sign * axis(static_cast<Eigen::Index>(j))));
      }
    }
    projections.push_back(std::move(p));
  }
  return cfg.with_projections(std::move(projections));
}

/// Theoretical token bitrate G * R * log2(prod l_i) * fps.
inline double bitrate(const GrfsqConfig& cfg, double fps) {
  detail::require(std::isfinite(fps) && fps > 0.0, ErrorCode::InvalidInput, "fps must be positive");
  return static_cast<double>(cfg.num_groups() * cfg.num_residuals()) *
         std::log2(static_cast<double>(cfg.codebook_size())) * fps;
}

/// Bitrate of an unquantized representation: dims * bits_per_value * fps.
inline double continuous_bitrate(std::size_t dims, double bits_per_value, double fps) {
  detail::require(std::isfinite(fps) && fps > 0.0, ErrorCode::InvalidInput, "fps must be positive");
  return static_cast<double>(dims) * bits_per_value * fps;
}

/// Fraction of each (group, residual) codebook used at least once, in percent.
inline UtilizationReport codebook_utilization(const IndexTensor& tokens, std::uint64_t codebook_size) {
  detail::require(codebook_size >= 1, ErrorCode::InvalidConfig, "codebook size must be positive");
  UtilizationReport out;
  const std::size_t books = tokens.groups() * tokens.residuals();
  out.per_codebook_percent.assign(books, 0.0);
  if (tokens.frames() == 0 || books == 0) {
    out.empty_input = true;
    return out;
  }
  std::vector<std::vector<CodebookIndex>> seen(books);
  for (std::size_t t = 0; t < tokens.frames(); ++t) {
    const auto row = tokens.frame(t);
    for (std::size_t b = 0; b < books; ++b) {
      detail::require(row[b] < codebook_size, ErrorCode::InvalidIndex,
                      "token " + std::to_string(row[b]) + " >= codebook size " + std::to_string(codebook_size));
      seen[b].push_back(row[b]);
    }
  }
  double sum = 0.0;
  for (std::size_t b = 0; b < books; ++b) {
    std::sort(seen[b].begin(), seen[b].end());
    const auto distinct = static_cast<double>(std::unique(seen[b].begin(), seen[b].end()) - seen[b].begin());
    out.per_codebook_percent[b] = 100.0 * distinct / static_cast<double>(codebook_size);
    sum += out.per_codebook_percent[b];
  }
  out.mean_percent = sum / static_cast<double>(books);
  return out;
}

inline UtilizationReport utilization(const IndexTensor& tokens, const GrfsqConfig& cfg) {
  detail::require(tokens.empty() || (tokens.groups() == cfg.num_groups() && tokens.residuals() == cfg.num_residuals()),
                  ErrorCode::ConfigMismatch, "token tensor shape does not match config");
  return codebook_utilization(tokens, cfg.codebook_size());
}

}  // namespace grfsq
