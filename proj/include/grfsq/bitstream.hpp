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

// `.grfq` token streams.
//
// Layout (scalars little-endian):
//
//   "GRFQ"           4 bytes
//   version          u8 (= 1)
//   G, R, d          u8 each
//   levels           d x u8
//   group_dim        u16
//   total_dim        u16
//   frame_count      u32
//   fps              f32
//   packing_mode     u8  (0 = mixed radix, 1 = fixed width)
//   projection_flag  u8  (1: G * d * d_g f32 down-matrix entries follow, row-major)
//   header_crc       u32 (CRC-32 of every preceding header byte)
//   payload          frame_count blocks of block_bytes(cfg, mode)
//
// A block holds one frame's G*R indices, group-major and residual-minor.
// Mixed radix treats them as digits of one base-C integer (C = prod l_i,
// first index least significant) written in ceil(G*R*log2 C) bits. Fixed
// width writes each index in ceil(log2 C) bits. Bits are packed MSB first;
// the tail of the last byte is zero padding.

#include <zlib.h>

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "grfsq/error.hpp"
#include "grfsq/fsq.hpp"
#include "grfsq/grfsq.hpp"

namespace grfsq {

enum class PackingMode : std::uint8_t { MixedRadix = 0, FixedWidth = 1 };

inline constexpr std::array<char, 4> kStreamMagic{'G', 'R', 'F', 'Q'};
inline constexpr std::uint8_t kStreamVersion = 1;

struct StreamHeader {
  GrfsqConfig config;
  std::uint32_t frame_count = 0;
  float fps = 25.0f;
  PackingMode packing = PackingMode::MixedRadix;

  bool operator==(const StreamHeader&) const = default;
};

namespace detail {

// Little-endian limbs; just enough arithmetic for radix conversion.
class BigUint {
 public:
  BigUint() = default;
  explicit BigUint(std::uint64_t v) {
    if (v != 0) limbs_.push_back(static_cast<std::uint32_t>(v));
    if ((v >> 32) != 0) limbs_.push_back(static_cast<std::uint32_t>(v >> 32));
  }

  // *this = *this * mul + add
  void mul_add(std::uint64_t mul, std::uint64_t add) {
    unsigned __int128 carry = add;
    for (auto& limb : limbs_) {
      const unsigned __int128 cur = static_cast<unsigned __int128>(limb) * mul + carry;
      limb = static_cast<std::uint32_t>(cur);
      carry = cur >> 32;
    }
    while (carry != 0) {
      limbs_.push_back(static_cast<std::uint32_t>(carry));
      carry >>= 32;
    }
    trim();
  }

  // *this /= div, returns the remainder.
  std::uint64_t div_mod(std::uint64_t div) {
    unsigned __int128 rem = 0;
    for (std::size_t i = limbs_.size(); i-- > 0;) {
      const unsigned __int128 cur = (rem << 32) | limbs_[i];
      limbs_[i] = static_cast<std::uint32_t>(cur / div);
      rem = cur % div;
    }
    trim();
    return static_cast<std::uint64_t>(rem);
  }

  void decrement() {
    for (auto& limb : limbs_) {
      if (limb-- != 0) break;
    }
    trim();
  }

  bool is_zero() const noexcept { return limbs_.empty(); }

  std::size_t bit_length() const noexcept {
    if (limbs_.empty()) return 0;
    return (limbs_.size() - 1) * 32 + static_cast<std::size_t>(std::bit_width(limbs_.back()));
  }

  bool bit(std::size_t i) const noexcept {
    const std::size_t limb = i / 32;
    return limb < limbs_.size() && ((limbs_[limb] >> (i % 32)) & 1u) != 0;
  }

  void set_bit(std::size_t i) {
    const std::size_t limb = i / 32;
    if (limb >= limbs_.size()) limbs_.resize(limb + 1, 0);
    limbs_[limb] |= (1u << (i % 32));
  }

 private:
  void trim() {
    while (!limbs_.empty() && limbs_.back() == 0) limbs_.pop_back();
  }

  std::vector<std::uint32_t> limbs_;
};

inline bool get_bit(std::span<const std::uint8_t> bytes, std::size_t pos) {
  return ((bytes[pos / 8] >> (7 - pos % 8)) & 1u) != 0;
}

inline void put_bit(std::span<std::uint8_t> bytes, std::size_t pos) {
  bytes[pos / 8] = static_cast<std::uint8_t>(bytes[pos / 8] | (1u << (7 - pos % 8)));
}

}  // namespace detail

/// Bit and byte geometry of one frame block for a config and mode.
class FramePacker {
 public:
  FramePacker(const GrfsqConfig& cfg, PackingMode mode)
      : mode_(mode), count_(cfg.indices_per_frame()), radix_(cfg.codebook_size()) {
    detail::BigUint top(radix_ - 1);
    index_bits_ = top.bit_length();
    if (mode_ == PackingMode::MixedRadix) {
      // Smallest width holding C^n - 1.
      detail::BigUint span_value(1);
      for (std::size_t i = 0; i < count_; ++i) span_value.mul_add(radix_, 0);
      span_value.decrement();
      bits_ = span_value.bit_length();
    } else {
      bits_ = index_bits_ * count_;
    }
    bytes_ = (bits_ + 7) / 8;
  }

  std::size_t block_bits() const noexcept { return bits_; }
  std::size_t block_bytes() const noexcept { return bytes_; }
  PackingMode mode() const noexcept { return mode_; }

  void pack(std::span<const CodebookIndex> indices, std::span<std::uint8_t> out) const {
    detail::require(indices.size() == count_, ErrorCode::InvalidIndex,
                    "expected " + std::to_string(count_) + " indices per frame, got " + std::to_string(indices.size()));
    detail::require(out.size() == bytes_, ErrorCode::InvalidInput, "output block has the wrong size");
    for (CodebookIndex idx : indices) {
      detail::require(idx < radix_, ErrorCode::InvalidIndex,
                      "index " + std::to_string(idx) + " >= codebook size " + std::to_string(radix_));
    }
    std::fill(out.begin(), out.end(), std::uint8_t{0});
    if (mode_ == PackingMode::MixedRadix) {
      detail::BigUint value;
      for (std::size_t i = count_; i-- > 0;) value.mul_add(radix_, indices[i]);
      for (std::size_t b = 0; b < bits_; ++b) {
        if (value.bit(bits_ - 1 - b)) detail::put_bit(out, b);
      }
    } else {
      std::size_t pos = 0;
      for (CodebookIndex idx : indices) {
        for (std::size_t b = index_bits_; b-- > 0; ++pos) {
          if (((idx >> b) & 1u) != 0) detail::put_bit(out, pos);
        }
      }
    }
  }

  std::vector<CodebookIndex> unpack(std::span<const std::uint8_t> block) const {
    detail::require(block.size() == bytes_, ErrorCode::CorruptStream,
                    "block has " + std::to_string(block.size()) + " bytes, expected " + std::to_string(bytes_));
    for (std::size_t b = bits_; b < bytes_ * 8; ++b) {
      detail::require(!detail::get_bit(block, b), ErrorCode::CorruptStream, "nonzero padding bits");
    }
    std::vector<CodebookIndex> out(count_);
    if (mode_ == PackingMode::MixedRadix) {
      detail::BigUint value;
      for (std::size_t b = 0; b < bits_; ++b) {
        if (detail::get_bit(block, b)) value.set_bit(bits_ - 1 - b);
      }
      for (std::size_t i = 0; i < count_; ++i) out[i] = value.div_mod(radix_);
      detail::require(value.is_zero(), ErrorCode::CorruptStream, "mixed-radix block value out of range");
    } else {
      std::size_t pos = 0;
      for (std::size_t i = 0; i < count_; ++i) {
        CodebookIndex idx = 0;
        for (std::size_t b = 0; b < index_bits_; ++b, ++pos) idx = (idx << 1) | (detail::get_bit(block, pos) ? 1u : 0u);
        detail::require(idx < radix_, ErrorCode::CorruptStream, "index out of range in fixed-width block");
        out[i] = idx;
      }
    }
    return out;
  }

 private:
  PackingMode mode_;
  std::size_t count_;
  std::uint64_t radix_;
  std::size_t index_bits_ = 0;
  std::size_t bits_ = 0;
  std::size_t bytes_ = 0;
};

inline std::vector<std::uint8_t> frame_pack(std::span<const CodebookIndex> indices, const GrfsqConfig& cfg,
                                            PackingMode mode) {
  const FramePacker packer(cfg, mode);
  std::vector<std::uint8_t> out(packer.block_bytes());
  packer.pack(indices, out);
  return out;
}

inline std::vector<CodebookIndex> frame_unpack(std::span<const std::uint8_t> block, const GrfsqConfig& cfg,
                                               PackingMode mode) {
  return FramePacker(cfg, mode).unpack(block);
}

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  std::vector<std::uint8_t> bytes;
};

class ByteReader {
 public:
  explicit ByteReader(std::istream& in) : in_(in) {}

  std::uint8_t u8() { return take<1>()[0]; }
  std::uint16_t u16() {
    const auto b = take<2>();
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32() {
    const auto b = take<4>();
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  float f32() { return std::bit_cast<float>(u32()); }

  const std::vector<std::uint8_t>& consumed() const noexcept { return consumed_; }

 private:
  template <std::size_t N>
  std::array<std::uint8_t, N> take() {
    std::array<std::uint8_t, N> b{};
    in_.read(reinterpret_cast<char*>(b.data()), N);
    require(in_.gcount() == static_cast<std::streamsize>(N), ErrorCode::CorruptStream, "truncated header");
    consumed_.insert(consumed_.end(), b.begin(), b.end());
    return b;
  }

  std::istream& in_;
  std::vector<std::uint8_t> consumed_;
};

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_header(const StreamHeader& header) {
  const GrfsqConfig& cfg = header.config;
  const LevelSpec& levels = cfg.levels();
  detail::require(cfg.num_groups() <= 255 && cfg.num_residuals() <= 255 && levels.dims() <= 255,
                  ErrorCode::InvalidConfig, "G, R and d must each fit in one byte");
  detail::require(cfg.group_dim() <= 0xFFFF && cfg.total_dim() <= 0xFFFF, ErrorCode::InvalidConfig,
                  "dimensions must fit in 16 bits");
  detail::require(std::isfinite(header.fps) && header.fps > 0.0f, ErrorCode::InvalidConfig, "fps must be positive");

  detail::ByteWriter w;
  for (char c : kStreamMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u8(kStreamVersion);
  w.u8(static_cast<std::uint8_t>(cfg.num_groups()));
  w.u8(static_cast<std::uint8_t>(cfg.num_residuals()));
  w.u8(static_cast<std::uint8_t>(levels.dims()));
  for (std::uint32_t l : levels.levels()) {
    detail::require(l <= 255, ErrorCode::InvalidConfig, "level counts must fit in one byte");
    w.u8(static_cast<std::uint8_t>(l));
  }
  w.u16(static_cast<std::uint16_t>(cfg.group_dim()));
  w.u16(static_cast<std::uint16_t>(cfg.total_dim()));
  w.u32(header.frame_count);
  w.f32(header.fps);
  w.u8(static_cast<std::uint8_t>(header.packing));
  w.u8(cfg.calibrated() ? 1 : 0);
  if (cfg.calibrated()) {
    for (const Projection& p : cfg.projections()) {
      for (double v : p.down) w.f32(static_cast<float>(v));
    }
  }
  w.u32(detail::crc32_of(w.bytes));
  return std::move(w.bytes);
}

inline StreamHeader decode_header(std::istream& in) {
  detail::ByteReader r(in);
  std::array<char, 4> magic{};
  for (char& c : magic) c = static_cast<char>(r.u8());
  detail::require(magic == kStreamMagic, ErrorCode::CorruptStream, "bad magic (not a .grfq stream)");
  const std::uint8_t version = r.u8();
  detail::require(version == kStreamVersion, ErrorCode::CorruptStream,
                  "unsupported stream version " + std::to_string(version));
  const std::uint8_t groups = r.u8();
  const std::uint8_t residuals = r.u8();
  const std::uint8_t dims = r.u8();
  std::vector<std::uint32_t> levels(dims);
  for (auto& l : levels) l = r.u8();
  const std::uint16_t group_dim = r.u16();
  const std::uint16_t total_dim = r.u16();
  const std::uint32_t frame_count = r.u32();
  const float fps = r.f32();
  const std::uint8_t packing = r.u8();
  const std::uint8_t projection_flag = r.u8();

  // Validate the fixed fields before trusting any size they imply.
  detail::require(groups >= 1 && residuals >= 1 && dims >= 1, ErrorCode::CorruptStream, "zero-sized config in header");
  detail::require(static_cast<std::size_t>(groups) * group_dim == total_dim, ErrorCode::CorruptStream,
                  "header dimensions are inconsistent (total_dim != G * group_dim)");
  detail::require(group_dim >= dims, ErrorCode::CorruptStream, "group_dim smaller than FSQ dimension");
  detail::require(packing <= 1, ErrorCode::CorruptStream, "unknown packing mode " + std::to_string(packing));
  detail::require(projection_flag <= 1, ErrorCode::CorruptStream, "bad projection flag");
  detail::require(projection_flag == 0 || group_dim > dims, ErrorCode::CorruptStream,
                  "projection flag set for an unprojected config");
  detail::require(std::isfinite(fps) && fps > 0.0f, ErrorCode::CorruptStream, "fps must be positive");

  std::vector<Projection> projections;
  if (projection_flag == 1) {
    projections.assign(groups, Projection{dims, group_dim, std::vector<double>(std::size_t{dims} * group_dim)});
    for (Projection& p : projections) {
      for (double& v : p.down) v = static_cast<double>(r.f32());
    }
  }
  const std::vector<std::uint8_t> header_bytes = r.consumed();
  const std::uint32_t crc = r.u32();
  detail::require(crc == detail::crc32_of(header_bytes), ErrorCode::CorruptStream, "header checksum mismatch");

  StreamHeader header;
  try {
    header.config = GrfsqConfig::make(groups, residuals, LevelSpec(std::move(levels)), total_dim);
    if (projection_flag == 1) header.config = header.config.with_projections(std::move(projections));
  } catch (const Error& e) {
    detail::fail(ErrorCode::CorruptStream, std::string("invalid config in header: ") + e.what());
  }
  header.frame_count = frame_count;
  header.fps = fps;
  header.packing = static_cast<PackingMode>(packing);
  return header;
}

/// Writes header and payload; returns the number of bytes written.
inline std::size_t write_stream(const StreamHeader& header, const IndexTensor& tokens, std::ostream& sink) {
  const GrfsqConfig& cfg = header.config;
  detail::require(tokens.frames() == header.frame_count, ErrorCode::ConfigMismatch,
                  "header frame_count does not match tensor");
  detail::require(tokens.frames() == 0 ||
                      (tokens.groups() == cfg.num_groups() && tokens.residuals() == cfg.num_residuals()),
                  ErrorCode::ConfigMismatch, "tensor shape does not match header config");
  const std::vector<std::uint8_t> head = encode_header(header);
  sink.write(reinterpret_cast<const char*>(head.data()), static_cast<std::streamsize>(head.size()));
  const FramePacker packer(cfg, header.packing);
  std::vector<std::uint8_t> block(packer.block_bytes());
  for (std::size_t t = 0; t < tokens.frames(); ++t) {
    packer.pack(tokens.frame(t), block);
    sink.write(reinterpret_cast<const char*>(block.data()), static_cast<std::streamsize>(block.size()));
  }
  detail::require(static_cast<bool>(sink), ErrorCode::Io, "write failed");
  return head.size() + tokens.frames() * packer.block_bytes();
}

struct DecodedStream {
  StreamHeader header;
  IndexTensor tokens;
};

inline DecodedStream read_stream(std::istream& source) {
  DecodedStream out;
  out.header = decode_header(source);
  const GrfsqConfig& cfg = out.header.config;
  const FramePacker packer(cfg, out.header.packing);
  // Frames are appended as they arrive so a bogus frame_count cannot force
  // a large allocation before the payload is seen.
  out.tokens = IndexTensor(0, cfg.num_groups(), cfg.num_residuals());
  std::vector<std::uint8_t> block(packer.block_bytes());
  for (std::size_t t = 0; t < out.header.frame_count; ++t) {
    source.read(reinterpret_cast<char*>(block.data()), static_cast<std::streamsize>(block.size()));
    detail::require(source.gcount() == static_cast<std::streamsize>(block.size()), ErrorCode::CorruptStream,
                    "truncated payload at frame " + std::to_string(t));
    out.tokens.push_frame(packer.unpack(block));
  }
  source.peek();
  detail::require(source.eof(), ErrorCode::CorruptStream, "trailing bytes after payload");
  return out;
}

}  // namespace grfsq
