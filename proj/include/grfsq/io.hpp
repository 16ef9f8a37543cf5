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

// Text interchange formats: frame files (JSON-lines or CSV), speech-token
// files (one integer per line) and control tracks (JSON-lines with `h`, `g`,
// `b` arrays).

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "grfsq/error.hpp"
#include "grfsq/generation.hpp"
#include "grfsq/grfsq.hpp"

namespace grfsq::io {

enum class FrameFormat { Auto, JsonLines, Csv };

namespace detail {

using grfsq::detail::fail;
using grfsq::detail::require;

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

inline Frame parse_json_frame(std::string_view text, std::size_t line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::InvalidInput, at_line(line) + "malformed JSON (" + e.what() + ")");
  }
  require(j.is_array(), ErrorCode::InvalidInput, at_line(line) + "expected a JSON array of numbers");
  Frame f;
  f.reserve(j.size());
  for (const auto& v : j) {
    require(v.is_number(), ErrorCode::InvalidInput, at_line(line) + "non-numeric value");
    const double x = v.get<double>();
    require(std::isfinite(x), ErrorCode::InvalidInput, at_line(line) + "non-finite value");
    f.push_back(x);
  }
  return f;
}

inline Frame parse_csv_frame(std::string_view text, std::size_t line) {
  Frame f;
  while (true) {
    const std::size_t comma = text.find(',');
    const std::string field(trim(text.substr(0, comma)));
    require(!field.empty(), ErrorCode::InvalidInput, at_line(line) + "empty CSV field");
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(field, &used);
    } catch (const std::exception&) {
      fail(ErrorCode::InvalidInput, at_line(line) + "cannot parse '" + field + "' as a number");
    }
    require(used == field.size(), ErrorCode::InvalidInput, at_line(line) + "cannot parse '" + field + "' as a number");
    require(std::isfinite(x), ErrorCode::InvalidInput, at_line(line) + "non-finite value");
    f.push_back(x);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return f;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open '" + path + "' for reading");
  return in;
}

}  // namespace detail

/// Reads one frame per non-empty line; every frame must have the same width.
inline FrameSeq read_frames(std::istream& in, FrameFormat format = FrameFormat::Auto) {
  FrameSeq frames;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view text = detail::trim(raw);
    if (text.empty()) continue;
    FrameFormat fmt = format;
    if (fmt == FrameFormat::Auto) fmt = text.front() == '[' ? FrameFormat::JsonLines : FrameFormat::Csv;
    Frame f = fmt == FrameFormat::JsonLines ? detail::parse_json_frame(text, line) : detail::parse_csv_frame(text, line);
    if (!frames.empty()) {
      detail::require(f.size() == frames.front().size(), ErrorCode::InvalidInput,
                      detail::at_line(line) + "frame has " + std::to_string(f.size()) + " values, expected " +
                          std::to_string(frames.front().size()));
    }
    detail::require(!f.empty(), ErrorCode::InvalidInput, detail::at_line(line) + "empty frame");
    frames.push_back(std::move(f));
  }
  return frames;
}

inline FrameSeq read_frames(const std::string& path) {
  std::ifstream in = detail::open_input(path);
  const bool csv = path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
  return read_frames(in, csv ? FrameFormat::Csv : FrameFormat::Auto);
}

/// JSON-lines; doubles are written with round-trip precision.
inline void write_frames(const FrameSeq& frames, std::ostream& out) {
  for (const Frame& f : frames) out << nlohmann::json(f).dump() << '\n';
}

inline SpeechTokenSeq read_speech_tokens(std::istream& in, std::uint32_t vocab = kDefaultSpeechVocab) {
  SpeechTokenSeq seq;
  seq.vocab = vocab;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view text = detail::trim(raw);
    if (text.empty()) continue;
    std::uint64_t value = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    detail::require(ec == std::errc() && end == text.data() + text.size(), ErrorCode::InvalidInput,
                    detail::at_line(line) + "expected a non-negative integer token");
    detail::require(value < vocab, ErrorCode::InvalidInput,
                    detail::at_line(line) + "token " + std::to_string(value) + " >= vocabulary size " +
                        std::to_string(vocab));
    seq.tokens.push_back(static_cast<SpeechToken>(value));
  }
  return seq;
}

inline SpeechTokenSeq read_speech_tokens(const std::string& path, std::uint32_t vocab = kDefaultSpeechVocab) {
  std::ifstream in = detail::open_input(path);
  return read_speech_tokens(in, vocab);
}

inline ControlTrack read_controls(std::istream& in) {
  ControlTrack track;
  std::string raw;
  std::size_t line = 0;
  auto take = [&](const nlohmann::json& j, const char* key, double* dst, std::size_t n) {
    detail::require(j.contains(key) && j[key].is_array() && j[key].size() == n, ErrorCode::InvalidInput,
                    detail::at_line(line) + "field '" + key + "' must be an array of " + std::to_string(n) + " numbers");
    for (std::size_t i = 0; i < n; ++i) {
      detail::require(j[key][i].is_number(), ErrorCode::InvalidInput,
                      detail::at_line(line) + "field '" + key + "' has a non-numeric entry");
      dst[i] = j[key][i].get<double>();
      detail::require(std::isfinite(dst[i]), ErrorCode::InvalidInput, detail::at_line(line) + "non-finite control value");
    }
  };
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view text = detail::trim(raw);
    if (text.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      detail::fail(ErrorCode::InvalidInput, detail::at_line(line) + "malformed JSON (" + e.what() + ")");
    }
    detail::require(j.is_object(), ErrorCode::InvalidInput, detail::at_line(line) + "expected a JSON object");
    ControlFrame c;
    take(j, "h", c.head_pose, 3);
    take(j, "g", c.gaze, 2);
    take(j, "b", c.blink, 2);
    track.push_back(c);
  }
  return track;
}

inline ControlTrack read_controls(const std::string& path) {
  std::ifstream in = detail::open_input(path);
  return read_controls(in);
}

}  // namespace grfsq::io
