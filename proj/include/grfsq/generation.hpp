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

// Coarse-to-fine token generation over residual layers.
//
// Generation is autoregressive across residual layers and parallel across
// time: pass r predicts every frame's layer-r tokens in a single predictor
// call, conditioned on the speech tokens, the control tracks, a global
// feature, the 0-based layer indicator and the layer r-1 tokens (a zero
// matrix for r = 0).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "grfsq/error.hpp"
#include "grfsq/grfsq.hpp"

namespace grfsq {

using SpeechToken = std::uint32_t;

inline constexpr std::uint32_t kDefaultSpeechVocab = 4096;
inline constexpr double kProbabilityFloor = 1e-12;

struct SpeechTokenSeq {
  std::vector<SpeechToken> tokens;
  std::uint32_t vocab = kDefaultSpeechVocab;
  double rate = 25.0;

  std::size_t size() const noexcept { return tokens.size(); }

  void validate() const {
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      detail::require(tokens[t] < vocab, ErrorCode::InvalidInput,
                      "speech token " + std::to_string(tokens[t]) + " at frame " + std::to_string(t) +
                          " >= vocabulary size " + std::to_string(vocab));
    }
  }
};

struct ControlFrame {
  double head_pose[3] = {0.0, 0.0, 0.0};
  double gaze[2] = {0.0, 0.0};
  double blink[2] = {0.0, 0.0};
};

using ControlTrack = std::vector<ControlFrame>;

/// Tokens of one residual layer, shape (frames, groups).
struct TokenGrid {
  std::size_t frames = 0;
  std::size_t groups = 0;
  std::vector<CodebookIndex> tokens;

  TokenGrid() = default;
  TokenGrid(std::size_t t, std::size_t g) : frames(t), groups(g), tokens(t * g, 0) {}

  CodebookIndex at(std::size_t t, std::size_t g) const { return tokens[t * groups + g]; }
  CodebookIndex& at(std::size_t t, std::size_t g) { return tokens[t * groups + g]; }

  bool operator==(const TokenGrid&) const = default;
};

inline TokenGrid layer_of(const IndexTensor& tensor, std::size_t r) {
  TokenGrid out(tensor.frames(), tensor.groups());
  for (std::size_t t = 0; t < tensor.frames(); ++t) {
    for (std::size_t g = 0; g < tensor.groups(); ++g) out.at(t, g) = tensor.at(t, g, r);
  }
  return out;
}

// Frame-wise row layout: [A_t, h(3), g(2), b(2), prev_layer_tokens(G)].
inline constexpr std::size_t kSpeechColumn = 0;
inline constexpr std::size_t kHeadPoseColumn = 1;
inline constexpr std::size_t kGazeColumn = 4;
inline constexpr std::size_t kBlinkColumn = 6;
inline constexpr std::size_t kPrevTokenColumn = 8;

struct GenerationContext {
  std::vector<double> global_feature;
  std::size_t layer = 0;
  std::size_t num_layers = 1;
  std::size_t frames = 0;
  std::size_t groups = 0;
  std::size_t width = 0;
  std::vector<double> framewise;  // frames x width
  TokenGrid prev_layer_tokens;

  std::span<const double> row(std::size_t t) const {
    return std::span<const double>(framewise).subspan(t * width, width);
  }
  SpeechToken speech_token(std::size_t t) const {
    return static_cast<SpeechToken>(framewise[t * width + kSpeechColumn]);
  }

  bool operator==(const GenerationContext&) const = default;
};

struct PredictionGrid {
  std::size_t frames = 0;
  std::size_t groups = 0;
  std::size_t classes = 0;
  std::vector<double> probs;  // frames x groups x classes

  PredictionGrid() = default;
  PredictionGrid(std::size_t t, std::size_t g, std::size_t c) : frames(t), groups(g), classes(c), probs(t * g * c, 0.0) {}

  std::span<double> row(std::size_t t, std::size_t g) {
    return std::span<double>(probs).subspan((t * groups + g) * classes, classes);
  }
  std::span<const double> row(std::size_t t, std::size_t g) const {
    return std::span<const double>(probs).subspan((t * groups + g) * classes, classes);
  }

  /// True when every (t, g) row is nonnegative and sums to 1 within `tol`.
  bool is_distribution(double tol = 1e-9) const {
    if (probs.size() != frames * groups * classes) return false;
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t g = 0; g < groups; ++g) {
        double sum = 0.0;
        for (double p : row(t, g)) {
          if (!(p >= 0.0) || !std::isfinite(p)) return false;
          sum += p;
        }
        if (std::abs(sum - 1.0) > tol) return false;
      }
    }
    return true;
  }
};

struct Pass {
  std::size_t layer = 0;
  std::vector<std::size_t> positions;
};

struct Schedule {
  std::vector<Pass> passes;
};

inline Schedule build_schedule(std::size_t frames, std::size_t layers) {
  detail::require(layers >= 1, ErrorCode::InvalidInput, "need at least one residual layer");
  Schedule s;
  s.passes.resize(layers);
  for (std::size_t r = 0; r < layers; ++r) {
    s.passes[r].layer = r;
    s.passes[r].positions.resize(frames);
    for (std::size_t t = 0; t < frames; ++t) s.passes[r].positions[t] = t;
  }
  return s;
}

inline GenerationContext assemble_context(std::span<const double> global_feature, std::size_t layer,
                                          std::size_t num_layers, const SpeechTokenSeq& speech,
                                          const ControlTrack& controls, const TokenGrid& prev_tokens,
                                          std::size_t groups) {
  const std::size_t T = speech.size();
  detail::require(layer < num_layers, ErrorCode::InvalidInput,
                  "layer " + std::to_string(layer) + " outside [0, " + std::to_string(num_layers) + ")");
  detail::require(groups >= 1, ErrorCode::InvalidInput, "need at least one group");
  detail::require(controls.size() == T, ErrorCode::InvalidInput,
                  "control track has " + std::to_string(controls.size()) + " frames, speech has " + std::to_string(T));
  detail::require_finite(global_feature, "global feature");
  speech.validate();
  if (layer > 0) {
    detail::require(prev_tokens.frames == T && prev_tokens.groups == groups &&
                        prev_tokens.tokens.size() == T * groups,
                    ErrorCode::InvalidInput, "previous-layer tokens have the wrong shape");
  }

  GenerationContext ctx;
  ctx.global_feature.assign(global_feature.begin(), global_feature.end());
  ctx.layer = layer;
  ctx.num_layers = num_layers;
  ctx.frames = T;
  ctx.groups = groups;
  ctx.width = kPrevTokenColumn + groups;
  ctx.prev_layer_tokens = layer == 0 ? TokenGrid(T, groups) : prev_tokens;
  ctx.framewise.assign(T * ctx.width, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    double* row = ctx.framewise.data() + t * ctx.width;
    const ControlFrame& c = controls[t];
    detail::require(std::isfinite(c.head_pose[0]) && std::isfinite(c.head_pose[1]) && std::isfinite(c.head_pose[2]) &&
                        std::isfinite(c.gaze[0]) && std::isfinite(c.gaze[1]) && std::isfinite(c.blink[0]) &&
                        std::isfinite(c.blink[1]),
                    ErrorCode::InvalidInput, "control frame " + std::to_string(t) + " is not finite");
    row[kSpeechColumn] = static_cast<double>(speech.tokens[t]);
    std::copy_n(c.head_pose, 3, row + kHeadPoseColumn);
    std::copy_n(c.gaze, 2, row + kGazeColumn);
    std::copy_n(c.blink, 2, row + kBlinkColumn);
    for (std::size_t g = 0; g < groups; ++g) {
      row[kPrevTokenColumn + g] = static_cast<double>(ctx.prev_layer_tokens.at(t, g));
    }
  }
  return ctx;
}

/// -sum_g sum_t ln p[t, g, target], probabilities floored at 1e-12.
inline double nll(const PredictionGrid& predictions, const TokenGrid& targets) {
  detail::require(predictions.frames == targets.frames && predictions.groups == targets.groups &&
                      predictions.probs.size() == predictions.frames * predictions.groups * predictions.classes,
                  ErrorCode::InvalidInput, "prediction and target shapes differ");
  double total = 0.0;
  for (std::size_t t = 0; t < targets.frames; ++t) {
    for (std::size_t g = 0; g < targets.groups; ++g) {
      const CodebookIndex y = targets.at(t, g);
      detail::require(y < predictions.classes, ErrorCode::InvalidInput, "target class out of range");
      total -= std::log(std::max(predictions.row(t, g)[y], kProbabilityFloor));
    }
  }
  return total;
}

/// Most probable class per (t, g); lowest class on ties.
inline TokenGrid argmax_sample(const PredictionGrid& predictions) {
  TokenGrid out(predictions.frames, predictions.groups);
  for (std::size_t t = 0; t < predictions.frames; ++t) {
    for (std::size_t g = 0; g < predictions.groups; ++g) {
      const auto row = predictions.row(t, g);
      out.at(t, g) = static_cast<CodebookIndex>(std::max_element(row.begin(), row.end()) - row.begin());
    }
  }
  return out;
}

/// Maps a full-sequence context to per-frame, per-group class distributions.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual PredictionGrid predict(const GenerationContext& context) = 0;
};

class UniformPredictor : public Predictor {
 public:
  explicit UniformPredictor(std::size_t classes) : classes_(classes) {}

  PredictionGrid predict(const GenerationContext& ctx) override {
    PredictionGrid grid(ctx.frames, ctx.groups, classes_);
    std::fill(grid.probs.begin(), grid.probs.end(), 1.0 / static_cast<double>(classes_));
    return grid;
  }

 private:
  std::size_t classes_;
};

/// One-hot on a fixed tensor's layer slice for whichever layer is requested.
class EchoPredictor : public Predictor {
 public:
  EchoPredictor(IndexTensor target, std::size_t classes) : target_(std::move(target)), classes_(classes) {}

  PredictionGrid predict(const GenerationContext& ctx) override {
    PredictionGrid grid(ctx.frames, ctx.groups, classes_);
    if (ctx.frames != target_.frames() || ctx.groups != target_.groups() || ctx.layer >= target_.residuals()) {
      return grid;
    }
    for (std::size_t t = 0; t < ctx.frames; ++t) {
      for (std::size_t g = 0; g < ctx.groups; ++g) grid.row(t, g)[target_.at(t, g, ctx.layer)] = 1.0;
    }
    return grid;
  }

 private:
  IndexTensor target_;
  std::size_t classes_;
};

/// Add-one smoothed conditional counts. Layer 0 conditions on the frame's
/// speech token; later layers condition on the same group's token in the
/// previous layer. Counts are kept per (layer, group).
class BigramPredictor : public Predictor {
 public:
  BigramPredictor(std::size_t layers, std::size_t groups, std::size_t classes)
      : layers_(layers), groups_(groups), classes_(classes), tables_(layers * groups) {}

  void train(const SpeechTokenSeq& speech, const IndexTensor& tokens) {
    detail::require(tokens.frames() == speech.size(), ErrorCode::InvalidInput,
                    "training tokens and speech have different lengths");
    detail::require(tokens.groups() == groups_ && tokens.residuals() == layers_, ErrorCode::InvalidInput,
                    "training tensor shape does not match predictor");
    speech.validate();
    for (std::size_t t = 0; t < tokens.frames(); ++t) {
      for (std::size_t r = 0; r < layers_; ++r) {
        for (std::size_t g = 0; g < groups_; ++g) {
          const std::uint64_t cond = r == 0 ? speech.tokens[t] : tokens.at(t, g, r - 1);
          const CodebookIndex y = tokens.at(t, g, r);
          detail::require(y < classes_, ErrorCode::InvalidInput, "training token out of range");
          Table& table = tables_[r * groups_ + g];
          auto& entry = table[cond];
          ++entry.total;
          ++entry.counts[y];
        }
      }
    }
  }

  PredictionGrid predict(const GenerationContext& ctx) override {
    detail::require(ctx.layer < layers_ && ctx.groups == groups_, ErrorCode::PredictorContractViolation,
                    "context does not match the trained predictor");
    PredictionGrid grid(ctx.frames, ctx.groups, classes_);
    const double c = static_cast<double>(classes_);
    for (std::size_t t = 0; t < ctx.frames; ++t) {
      for (std::size_t g = 0; g < groups_; ++g) {
        const std::uint64_t cond =
            ctx.layer == 0 ? ctx.speech_token(t) : ctx.prev_layer_tokens.at(t, g);
        const Table& table = tables_[ctx.layer * groups_ + g];
        const auto it = table.find(cond);
        const double total = it == table.end() ? 0.0 : static_cast<double>(it->second.total);
        auto row = grid.row(t, g);
        std::fill(row.begin(), row.end(), 1.0 / (total + c));
        if (it != table.end()) {
          for (const auto& [y, n] : it->second.counts) row[y] = (static_cast<double>(n) + 1.0) / (total + c);
        }
      }
    }
    return grid;
  }

 private:
  struct Entry {
    std::uint64_t total = 0;
    std::unordered_map<CodebookIndex, std::uint64_t> counts;
  };
  using Table = std::unordered_map<std::uint64_t, Entry>;

  std::size_t layers_;
  std::size_t groups_;
  std::size_t classes_;
  std::vector<Table> tables_;
};

namespace detail {

inline void check_grid(const PredictionGrid& grid, std::size_t frames, std::size_t groups, std::size_t classes) {
  require(grid.frames == frames && grid.groups == groups && grid.classes == classes &&
              grid.probs.size() == frames * groups * classes,
          ErrorCode::PredictorContractViolation,
          "predictor returned a (" + std::to_string(grid.frames) + ", " + std::to_string(grid.groups) + ", " +
              std::to_string(grid.classes) + ") grid, expected (" + std::to_string(frames) + ", " +
              std::to_string(groups) + ", " + std::to_string(classes) + ")");
  require(grid.is_distribution(), ErrorCode::PredictorContractViolation,
          "predictor output rows are not probability distributions");
}

}  // namespace detail

struct GenerationRequest {
  std::vector<double> global_feature;
  SpeechTokenSeq speech;
  ControlTrack controls;
  std::size_t layers = 4;
  std::size_t groups = 12;
  std::size_t classes = 625;
};

/// Runs one predictor call per layer and stacks the argmax tokens into a
/// (frames, groups, layers) tensor.
inline IndexTensor generate(Predictor& predictor, const GenerationRequest& req) {
  const std::size_t T = req.speech.size();
  const Schedule schedule = build_schedule(T, req.layers);
  IndexTensor out(T, req.groups, req.layers);
  TokenGrid prev(T, req.groups);
  for (const Pass& pass : schedule.passes) {
    const GenerationContext ctx =
        assemble_context(req.global_feature, pass.layer, req.layers, req.speech, req.controls, prev, req.groups);
    const PredictionGrid grid = predictor.predict(ctx);
    detail::check_grid(grid, T, req.groups, req.classes);
    prev = argmax_sample(grid);
    for (std::size_t t : pass.positions) {
      for (std::size_t g = 0; g < req.groups; ++g) out.at(t, g, pass.layer) = prev.at(t, g);
    }
  }
  return out;
}

/// Teacher-forced NLL per layer: layer r is scored with the true layer r-1
/// tokens from `targets` in its context.
inline std::vector<double> layer_nll(Predictor& predictor, const GenerationRequest& req, const IndexTensor& targets) {
  const std::size_t T = req.speech.size();
  detail::require(targets.frames() == T && targets.groups() == req.groups && targets.residuals() == req.layers,
                  ErrorCode::InvalidInput, "target tensor shape does not match the request");
  std::vector<double> out(req.layers, 0.0);
  TokenGrid prev(T, req.groups);
  for (std::size_t r = 0; r < req.layers; ++r) {
    const GenerationContext ctx =
        assemble_context(req.global_feature, r, req.layers, req.speech, req.controls, prev, req.groups);
    const PredictionGrid grid = predictor.predict(ctx);
    detail::check_grid(grid, T, req.groups, req.classes);
    const TokenGrid truth = layer_of(targets, r);
    out[r] = nll(grid, truth);
    prev = truth;
  }
  return out;
}

}  // namespace grfsq
