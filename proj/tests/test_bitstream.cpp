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

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "grfsq/bitstream.hpp"
#include "oracles.hpp"

namespace grfsq {
namespace {

ErrorCode code_of(auto&& fn, std::string* message = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (message != nullptr) *message = e.what();
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::Io;
}

std::vector<CodebookIndex> random_indices(std::size_t n, std::uint64_t radix, std::mt19937_64& rng) {
  std::uniform_int_distribution<CodebookIndex> u(0, radix - 1);
  std::vector<CodebookIndex> out(n);
  for (auto& v : out) v = u(rng);
  return out;
}

IndexTensor random_tensor(std::size_t frames, const GrfsqConfig& cfg, std::mt19937_64& rng) {
  IndexTensor t(frames, cfg.num_groups(), cfg.num_residuals());
  std::uniform_int_distribution<CodebookIndex> u(0, cfg.codebook_size() - 1);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

std::string serialize(const StreamHeader& h, const IndexTensor& t) {
  std::ostringstream out;
  write_stream(h, t, out);
  return out.str();
}

DecodedStream parse(const std::string& bytes) {
  std::istringstream in(bytes);
  return read_stream(in);
}

TEST(FramePacker, Geometry) {
  const GrfsqConfig ref = GrfsqConfig::reference();
  const FramePacker mixed(ref, PackingMode::MixedRadix);
  EXPECT_EQ(mixed.block_bits(), 446u);
  EXPECT_EQ(mixed.block_bits(), oracle::mixed_radix_bits(625, 48));
  EXPECT_EQ(mixed.block_bytes(), 56u);
  const FramePacker fixed(ref, PackingMode::FixedWidth);
  EXPECT_EQ(fixed.block_bits(), 480u);
  EXPECT_EQ(fixed.block_bytes(), 60u);

  const GrfsqConfig tiny = GrfsqConfig::make(1, 1, LevelSpec{2}, 1);
  EXPECT_EQ(FramePacker(tiny, PackingMode::MixedRadix).block_bits(), 1u);
  EXPECT_EQ(FramePacker(tiny, PackingMode::MixedRadix).block_bytes(), 1u);
}

TEST(FramePack, Examples) {
  const GrfsqConfig ref = GrfsqConfig::reference();
  EXPECT_EQ(frame_pack(std::vector<CodebookIndex>(48, 0), ref, PackingMode::MixedRadix),
            std::vector<std::uint8_t>(56, 0));
  const GrfsqConfig tiny = GrfsqConfig::make(1, 1, LevelSpec{2}, 1);
  EXPECT_EQ(frame_pack(std::vector<CodebookIndex>{1}, tiny, PackingMode::MixedRadix), std::vector<std::uint8_t>{0x80});
  EXPECT_EQ(frame_pack(std::vector<CodebookIndex>{0}, tiny, PackingMode::MixedRadix), std::vector<std::uint8_t>{0x00});

  // All-max digits give C^n - 1, i.e. 446 one bits followed by two zero pad bits.
  const auto top = frame_pack(std::vector<CodebookIndex>(48, 624), ref, PackingMode::MixedRadix);
  EXPECT_EQ(top, oracle::mixed_radix_block(std::vector<std::uint64_t>(48, 624), 625, 446));

  const GrfsqConfig three = GrfsqConfig::make(1, 2, LevelSpec{3}, 1);
  // 2 + 1 * 3 = 5 in ceil(log2 9) = 4 bits: 0101 -> 0x50.
  EXPECT_EQ(frame_pack(std::vector<CodebookIndex>{2, 1}, three, PackingMode::MixedRadix),
            std::vector<std::uint8_t>{0x50});
  // Fixed width: 2 bits each, 10 01 -> 0x90.
  EXPECT_EQ(frame_pack(std::vector<CodebookIndex>{2, 1}, three, PackingMode::FixedWidth),
            std::vector<std::uint8_t>{0x90});
}

TEST(FramePack, Errors) {
  const GrfsqConfig ref = GrfsqConfig::reference();
  EXPECT_EQ(code_of([&] { frame_pack(std::vector<CodebookIndex>(47, 0), ref, PackingMode::MixedRadix); }),
            ErrorCode::InvalidIndex);
  auto bad = std::vector<CodebookIndex>(48, 0);
  bad[5] = 625;
  EXPECT_EQ(code_of([&] { frame_pack(bad, ref, PackingMode::MixedRadix); }), ErrorCode::InvalidIndex);
  EXPECT_EQ(code_of([&] { frame_unpack(std::vector<std::uint8_t>(55, 0), ref, PackingMode::MixedRadix); }),
            ErrorCode::CorruptStream);
  auto pad = std::vector<std::uint8_t>(56, 0);
  pad[55] = 0x01;
  EXPECT_EQ(code_of([&] { frame_unpack(pad, ref, PackingMode::MixedRadix); }), ErrorCode::CorruptStream);
  // 4 bits hold up to 15 but 3^2 - 1 = 8 is the largest valid block value.
  const GrfsqConfig three = GrfsqConfig::make(1, 2, LevelSpec{3}, 1);
  EXPECT_EQ(code_of([&] { frame_unpack(std::vector<std::uint8_t>{0xF0}, three, PackingMode::MixedRadix); }),
            ErrorCode::CorruptStream);
  EXPECT_EQ(code_of([&] { frame_unpack(std::vector<std::uint8_t>{0xC0}, three, PackingMode::FixedWidth); }),
            ErrorCode::CorruptStream);
}

TEST(FramePack, MatchesBigIntegerOracle) {
  std::mt19937_64 rng(31);
  for (const GrfsqConfig& cfg : {GrfsqConfig::reference(), GrfsqConfig::make(3, 5, LevelSpec{7, 3, 2}, 3 * 3),
                                 GrfsqConfig::make(16, 8, LevelSpec::uniform(6, 8), 96)}) {
    const std::size_t n = cfg.indices_per_frame();
    const std::size_t bits = oracle::mixed_radix_bits(cfg.codebook_size(), n);
    for (int s = 0; s < 200; ++s) {
      const auto idx = random_indices(n, cfg.codebook_size(), rng);
      const auto block = frame_pack(idx, cfg, PackingMode::MixedRadix);
      ASSERT_EQ(block, oracle::mixed_radix_block(idx, cfg.codebook_size(), bits));
    }
  }
}

TEST(FramePack, RoundTripBothModes) {
  std::mt19937_64 rng(41);
  for (const GrfsqConfig& cfg : {GrfsqConfig::reference(), GrfsqConfig::make(2, 3, LevelSpec{5, 3}, 4),
                                 GrfsqConfig::make(1, 1, LevelSpec{2}, 1)}) {
    for (PackingMode mode : {PackingMode::MixedRadix, PackingMode::FixedWidth}) {
      for (int s = 0; s < 1000; ++s) {
        const auto idx = random_indices(cfg.indices_per_frame(), cfg.codebook_size(), rng);
        ASSERT_EQ(frame_unpack(frame_pack(idx, cfg, mode), cfg, mode), idx);
      }
    }
  }
}

TEST(Stream, PayloadSizes) {
  const GrfsqConfig ref = GrfsqConfig::reference();
  std::mt19937_64 rng(5);
  const IndexTensor tokens = random_tensor(25, ref, rng);
  const std::string header = serialize(StreamHeader{ref, 0, 25.0f, PackingMode::MixedRadix}, IndexTensor(0, 12, 4));
  const std::string full = serialize(StreamHeader{ref, 25, 25.0f, PackingMode::MixedRadix}, tokens);
  EXPECT_EQ(full.size() - header.size(), 1400u);
  // Magic + version + G R d + 4 levels + 2 + 2 + 4 + 4 + 1 + 1 + crc.
  EXPECT_EQ(header.size(), 4u + 1 + 3 + 4 + 2 + 2 + 4 + 4 + 1 + 1 + 4);
  EXPECT_EQ(header.substr(0, 4), "GRFQ");
}

TEST(Stream, RoundTrip) {
  std::mt19937_64 rng(6);
  const GrfsqConfig ref = GrfsqConfig::reference();
  const GrfsqConfig cal = calibrate_projections(oracle::uniform_frames(300, 120, 3), ref);
  for (const GrfsqConfig& cfg : {ref, cal, GrfsqConfig::make(3, 2, LevelSpec{4, 6}, 6)}) {
    for (PackingMode mode : {PackingMode::MixedRadix, PackingMode::FixedWidth}) {
      for (std::size_t frames : {0u, 1u, 17u}) {
        const IndexTensor tokens = random_tensor(frames, cfg, rng);
        const StreamHeader h{cfg, static_cast<std::uint32_t>(frames), 30.0f, mode};
        const DecodedStream back = parse(serialize(h, tokens));
        EXPECT_EQ(back.header, h);
        EXPECT_EQ(back.tokens.frames(), frames);
        EXPECT_EQ(back.tokens.data(), tokens.data());
      }
    }
  }
}

TEST(Stream, CalibratedReconstructionSurvives) {
  const GrfsqConfig cal = calibrate_projections(oracle::uniform_frames(300, 120, 4), GrfsqConfig::reference());
  const auto frames = oracle::uniform_frames(20, 120, 12);
  const auto q = quantize_sequence(frames, cal);
  const DecodedStream back = parse(serialize(StreamHeader{cal, 20, 25.0f, PackingMode::MixedRadix}, q.indices));
  for (std::size_t t = 0; t < 20; ++t) {
    ASSERT_EQ(grfsq_dequantize(back.tokens.frame(t), back.header.config), q.reconstructions[t]);
  }
}

TEST(Stream, EveryHeaderByteCorruptionDetected) {
  std::mt19937_64 rng(8);
  const GrfsqConfig cal = calibrate_projections(oracle::uniform_frames(300, 120, 5), GrfsqConfig::reference());
  for (const GrfsqConfig& cfg : {GrfsqConfig::reference(), cal}) {
    const IndexTensor tokens = random_tensor(3, cfg, rng);
    const StreamHeader h{cfg, 3, 25.0f, PackingMode::MixedRadix};
    const std::string good = serialize(h, tokens);
    const std::size_t header_bytes = encode_header(h).size();
    for (std::size_t i = 0; i < header_bytes; ++i) {
      for (unsigned flip : {0x01u, 0x80u, 0xFFu}) {
        std::string bad = good;
        bad[i] = static_cast<char>(static_cast<unsigned char>(bad[i]) ^ flip);
        ASSERT_EQ(code_of([&] { parse(bad); }), ErrorCode::CorruptStream) << "byte " << i << " flip " << flip;
      }
    }
  }
}

TEST(Stream, Diagnostics) {
  std::mt19937_64 rng(9);
  const GrfsqConfig ref = GrfsqConfig::reference();
  const std::string good = serialize(StreamHeader{ref, 4, 25.0f, PackingMode::MixedRadix}, random_tensor(4, ref, rng));
  std::string msg;

  EXPECT_EQ(code_of([&] { parse(good.substr(0, good.size() - 1)); }, &msg), ErrorCode::CorruptStream);
  EXPECT_NE(msg.find("truncated payload at frame 3"), std::string::npos) << msg;

  EXPECT_EQ(code_of([&] { parse(good + '\0'); }, &msg), ErrorCode::CorruptStream);
  EXPECT_NE(msg.find("trailing bytes"), std::string::npos) << msg;

  std::string magic = good;
  magic[0] = 'X';
  EXPECT_EQ(code_of([&] { parse(magic); }, &msg), ErrorCode::CorruptStream);
  EXPECT_NE(msg.find("bad magic"), std::string::npos) << msg;

  std::string version = good;
  version[4] = 2;
  EXPECT_EQ(code_of([&] { parse(version); }, &msg), ErrorCode::CorruptStream);
  EXPECT_NE(msg.find("version 2"), std::string::npos) << msg;

  EXPECT_EQ(code_of([&] { parse(good.substr(0, 10)); }, &msg), ErrorCode::CorruptStream);
  EXPECT_NE(msg.find("truncated header"), std::string::npos) << msg;
  EXPECT_EQ(code_of([&] { parse(""); }), ErrorCode::CorruptStream);
}

TEST(Stream, WriteRejectsMismatch) {
  const GrfsqConfig ref = GrfsqConfig::reference();
  std::ostringstream out;
  EXPECT_EQ(code_of([&] { write_stream(StreamHeader{ref, 2, 25.0f, PackingMode::MixedRadix}, IndexTensor(1, 12, 4), out); }),
            ErrorCode::ConfigMismatch);
  EXPECT_EQ(code_of([&] { write_stream(StreamHeader{ref, 1, 25.0f, PackingMode::MixedRadix}, IndexTensor(1, 6, 4), out); }),
            ErrorCode::ConfigMismatch);
}

}  // namespace
}  // namespace grfsq
