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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "grfsq/baselines.hpp"
#include "oracles.hpp"

namespace grfsq {
namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::Io;
}

std::vector<std::vector<double>> rows_of(const Codebook& cb) {
  std::vector<std::vector<double>> out;
  for (std::size_t c = 0; c < cb.k; ++c) out.emplace_back(cb.entry(c).begin(), cb.entry(c).end());
  return out;
}

FrameSeq two_blobs(std::size_t per_blob, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.1);
  FrameSeq out;
  for (std::size_t i = 0; i < per_blob; ++i) {
    out.push_back({-3.0 + n(rng), 1.0 + n(rng)});
    out.push_back({4.0 + n(rng), -2.0 + n(rng)});
  }
  return out;
}

TEST(KMeans, SingleClusterIsMean) {
  const auto data = oracle::uniform_frames(500, 3, 1, -2.0, 5.0);
  std::vector<double> mean(3, 0.0);
  for (const auto& f : data) {
    for (std::size_t j = 0; j < 3; ++j) mean[j] += f[j] / 500.0;
  }
  const auto fit = kmeans_fit(data, 1, 10, 7);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(fit.codebook.entries[j], mean[j], 1e-12);
}

TEST(KMeans, RepeatedPointsGiveZeroDistortion) {
  FrameSeq data;
  for (int i = 0; i < 30; ++i) data.push_back({static_cast<double>(i % 3), 1.0});
  const auto fit = kmeans_fit(data, 3, 10, 3);
  EXPECT_EQ(fit.objective.back(), 0.0);
  std::vector<double> firsts;
  for (std::size_t c = 0; c < 3; ++c) firsts.push_back(fit.codebook.entry(c)[0]);
  std::sort(firsts.begin(), firsts.end());
  EXPECT_EQ(firsts, (std::vector<double>{0.0, 1.0, 2.0}));
}

TEST(KMeans, TwoBlobs) {
  const auto fit = kmeans_fit(two_blobs(200, 11), 2, 20, 5);
  std::vector<std::vector<double>> c = rows_of(fit.codebook);
  std::sort(c.begin(), c.end());
  EXPECT_NEAR(c[0][0], -3.0, 0.05);
  EXPECT_NEAR(c[0][1], 1.0, 0.05);
  EXPECT_NEAR(c[1][0], 4.0, 0.05);
  EXPECT_NEAR(c[1][1], -2.0, 0.05);
}

TEST(KMeans, ObjectiveNonIncreasingAndDeterministic) {
  const auto data = oracle::uniform_frames(2000, 4, 13);
  const auto a = kmeans_fit(data, 32, 15, 99);
  for (std::size_t i = 1; i < a.objective.size(); ++i) EXPECT_LE(a.objective[i], a.objective[i - 1] + 1e-9);
  const auto b = kmeans_fit(data, 32, 15, 99);
  EXPECT_EQ(a.codebook, b.codebook);
  EXPECT_EQ(a.objective, b.objective);
}

TEST(KMeans, Errors) {
  const auto data = oracle::uniform_frames(5, 2, 1);
  EXPECT_EQ(code_of([&] { kmeans_fit(data, 6, 5, 0); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([&] { kmeans_fit(data, 0, 5, 0); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([&] { kmeans_fit({}, 1, 5, 0); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([&] { kmeans_fit(FrameSeq{{1.0}, {1.0, 2.0}}, 1, 5, 0); }), ErrorCode::InvalidInput);
}

TEST(Baselines, EncodingIsExhaustiveNearest) {
  const auto train = oracle::uniform_frames(600, 8, 21);
  const auto test = oracle::uniform_frames(200, 8, 22);
  for (const BaselineConfig& cfg : {BaselineConfig{Scheme::VQ, 64, 1, 1, 10, 1}, BaselineConfig{Scheme::GVQ, 16, 4, 1, 10, 1},
                                    BaselineConfig{Scheme::RVQ, 16, 1, 3, 10, 1},
                                    BaselineConfig{Scheme::GRVQ, 8, 2, 2, 10, 1}}) {
    const BaselineModel model = fit_baseline(train, cfg);
    const BaselineEncoding enc = baseline_encode(test, model);
    const std::size_t dg = 8 / cfg.groups;
    for (std::size_t t = 0; t < test.size(); ++t) {
      Frame recon(8, 0.0);
      for (std::size_t g = 0; g < cfg.groups; ++g) {
        std::vector<double> residual(test[t].begin() + static_cast<std::ptrdiff_t>(g * dg),
                                     test[t].begin() + static_cast<std::ptrdiff_t>((g + 1) * dg));
        for (std::size_t r = 0; r < cfg.residuals; ++r) {
          const auto rows = rows_of(model.codebook(g, r));
          const std::size_t best = oracle::nearest_row(rows, residual);
          ASSERT_EQ(enc.indices.at(t, g, r), best);
          for (std::size_t j = 0; j < dg; ++j) {
            recon[g * dg + j] += rows[best][j];
            residual[j] -= rows[best][j];
          }
        }
      }
      ASSERT_EQ(enc.reconstructions[t], recon);
    }
  }
}

TEST(Baselines, SingleStageGrvqEqualsVq) {
  const auto train = oracle::uniform_frames(500, 6, 31);
  const BaselineModel vq = fit_baseline(train, BaselineConfig{Scheme::VQ, 40, 1, 1, 8, 77});
  const BaselineModel grvq = fit_baseline(train, BaselineConfig{Scheme::GRVQ, 40, 1, 1, 8, 77});
  EXPECT_EQ(vq.codebooks, grvq.codebooks);
  EXPECT_EQ(baseline_encode(train, vq).indices, baseline_encode(train, grvq).indices);
}

TEST(Baselines, ResidualStagesReduceTrainingError) {
  const auto train = oracle::uniform_frames(800, 4, 41);
  double prev = 1e9;
  for (std::size_t r : {1u, 2u, 3u}) {
    const BaselineModel m = fit_baseline(train, BaselineConfig{Scheme::RVQ, 16, 1, r, 10, 3});
    const auto enc = baseline_encode(train, m);
    double err = 0.0;
    for (std::size_t t = 0; t < train.size(); ++t) err += detail::squared_distance(train[t], enc.reconstructions[t]);
    EXPECT_LT(err, prev);
    prev = err;
  }
}

TEST(Baselines, ConfigErrors) {
  const auto train = oracle::uniform_frames(50, 6, 1);
  EXPECT_EQ(code_of([&] { fit_baseline(train, BaselineConfig{Scheme::VQ, 8, 2, 1, 5, 0}); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([&] { fit_baseline(train, BaselineConfig{Scheme::GVQ, 8, 4, 1, 5, 0}); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([&] { fit_baseline(train, BaselineConfig{Scheme::RVQ, 8, 1, 0, 5, 0}); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([&] { fit_baseline(train, BaselineConfig{Scheme::VQ, 51, 1, 1, 5, 0}); }), ErrorCode::InvalidConfig);
  const BaselineModel m = fit_baseline(train, BaselineConfig{Scheme::GVQ, 4, 2, 1, 5, 0});
  EXPECT_EQ(code_of([&] { baseline_encode(FrameSeq{Frame(5, 0.0)}, m); }), ErrorCode::ConfigMismatch);
}

TEST(Baselines, Bitrates) {
  EXPECT_NEAR(baseline_bitrate(BaselineConfig{Scheme::VQ, 8196, 1, 1}, 25.0), 325.0176067253, 1e-6);
  EXPECT_NEAR(baseline_bitrate(BaselineConfig{Scheme::GVQ, 1024, 32, 1}, 25.0), 8000.0, 1e-9);
  EXPECT_NEAR(baseline_bitrate(BaselineConfig{Scheme::RVQ, 1024, 1, 32}, 25.0), 8000.0, 1e-9);
  EXPECT_NEAR(baseline_bitrate(BaselineConfig{Scheme::GRVQ, 1024, 12, 4}, 25.0), 12000.0, 1e-9);
}

TEST(Baselines, Utilization) {
  IndexTensor t(4, 1, 1);
  t.at(0, 0, 0) = 3;
  t.at(1, 0, 0) = 3;
  t.at(2, 0, 0) = 9;
  t.at(3, 0, 0) = 0;
  const auto u = baseline_utilization(t, BaselineConfig{Scheme::VQ, 10, 1, 1});
  EXPECT_DOUBLE_EQ(u.mean_percent, 30.0);
  EXPECT_EQ(code_of([&] { baseline_utilization(t, BaselineConfig{Scheme::GVQ, 10, 2, 1}); }), ErrorCode::ConfigMismatch);
}

TEST(Codebook, SaveLoadRoundTrip) {
  Codebook cb{3, 2, {0.5, -1.25, 3.0, 0.1, 1e-3, -7.0}};
  std::stringstream buf;
  save_codebook(cb, buf);
  EXPECT_EQ(buf.str().size(), 8u + 6 * 4);
  EXPECT_EQ(static_cast<unsigned char>(buf.str()[0]), 3u);
  const Codebook back = load_codebook(buf);
  EXPECT_EQ(back.k, 3u);
  EXPECT_EQ(back.dim, 2u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(back.entries[i], static_cast<double>(static_cast<float>(cb.entries[i])));
  std::stringstream cut(buf.str().substr(0, 12));
  EXPECT_EQ(code_of([&] { load_codebook(cut); }), ErrorCode::CorruptStream);
}

}  // namespace
}  // namespace grfsq
