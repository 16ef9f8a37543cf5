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

#include "cli.hpp"

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "grfsq/baselines.hpp"
#include "grfsq/bitstream.hpp"
#include "grfsq/error.hpp"
#include "grfsq/generation.hpp"
#include "grfsq/grfsq.hpp"
#include "grfsq/io.hpp"

namespace grfsq::cli {
namespace {

using nlohmann::ordered_json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput:
    case ErrorCode::InvalidCode:
    case ErrorCode::InvalidIndex:
    case ErrorCode::CorruptStream:
      return kExitInput;
    case ErrorCode::Io:
      return kExitIo;
    case ErrorCode::InvalidConfig:
    case ErrorCode::TooLarge:
    case ErrorCode::ConfigMismatch:
    case ErrorCode::DegenerateCalibration:
    case ErrorCode::PredictorContractViolation:
      return kExitConfig;
  }
  return kExitConfig;
}

LevelSpec parse_levels(const std::string& text) {
  std::vector<std::uint32_t> levels;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &used);
    } catch (const std::exception&) {
      detail::fail(ErrorCode::InvalidConfig, "bad --levels entry '" + item + "'");
    }
    detail::require(used == item.size() && v <= 0xFFFFFFFFul, ErrorCode::InvalidConfig,
                    "bad --levels entry '" + item + "'");
    levels.push_back(static_cast<std::uint32_t>(v));
  }
  return LevelSpec(std::move(levels));
}

std::vector<double> parse_reals(const std::string& text) {
  std::vector<double> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      detail::fail(ErrorCode::InvalidConfig, "bad real value '" + item + "'");
    }
  }
  return out;
}

PackingMode parse_packing(const std::string& text) {
  if (text == "mixed" || text == "mixed-radix" || text == "0") return PackingMode::MixedRadix;
  if (text == "fixed" || text == "fixed-width" || text == "1") return PackingMode::FixedWidth;
  detail::fail(ErrorCode::InvalidConfig, "unknown packing mode '" + text + "'");
}

std::string packing_name(PackingMode mode) {
  return mode == PackingMode::MixedRadix ? "mixed-radix" : "fixed-width";
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("GRFQ_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      detail::fail(ErrorCode::InvalidConfig, std::string("GRFQ_SEED is not an integer: ") + env);
    }
  }
  return 0;
}

ordered_json config_json(const GrfsqConfig& cfg, double fps) {
  ordered_json j;
  j["groups"] = cfg.num_groups();
  j["residuals"] = cfg.num_residuals();
  j["levels"] = cfg.levels().levels();
  j["codebook_size"] = cfg.codebook_size();
  j["group_dim"] = cfg.group_dim();
  j["total_dim"] = cfg.total_dim();
  j["fps"] = fps;
  j["calibrated"] = cfg.calibrated();
  return j;
}

ordered_json utilization_json(const UtilizationReport& u) {
  ordered_json j;
  j["mean_percent"] = u.mean_percent;
  j["per_codebook_percent"] = u.per_codebook_percent;
  j["empty"] = u.empty_input;
  return j;
}

std::ofstream open_output(const std::string& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  detail::require(static_cast<bool>(out), ErrorCode::Io, "cannot open '" + path + "' for writing");
  return out;
}

DecodedStream load_stream(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  detail::require(static_cast<bool>(in), ErrorCode::Io, "cannot open '" + path + "' for reading");
  return read_stream(in);
}

// ---------------------------------------------------------------- encode

struct EncodeOptions {
  std::string input;
  std::string output;
  std::size_t groups = 12;
  std::size_t residuals = 4;
  std::string levels = "5,5,5,5";
  double fps = 25.0;
  std::string packing = "mixed";
  std::string calibrate;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> dim;
  std::size_t threads = 1;
  std::string recon;
};

int cmd_encode(const EncodeOptions& opt, std::ostream& out) {
  const FrameSeq frames = io::read_frames(opt.input);
  const std::uint64_t seed = resolve_seed(opt.seed);
  std::size_t dim = opt.dim.value_or(120);
  if (!frames.empty()) {
    detail::require(!opt.dim || *opt.dim == frames.front().size(), ErrorCode::ConfigMismatch,
                    "input frames have " + std::to_string(frames.front().size()) + " values but --dim is " +
                        std::to_string(dim));
    dim = frames.front().size();
  }
  detail::require(std::isfinite(opt.fps) && opt.fps > 0.0, ErrorCode::InvalidConfig, "--fps must be positive");
  const PackingMode mode = parse_packing(opt.packing);
  GrfsqConfig cfg = GrfsqConfig::make(opt.groups, opt.residuals, parse_levels(opt.levels), dim);
  if (!opt.calibrate.empty()) cfg = calibrate_projections(io::read_frames(opt.calibrate), cfg);

  const SequenceQuantization q = quantize_sequence(frames, cfg, opt.threads);

  StreamHeader header{cfg, static_cast<std::uint32_t>(frames.size()), static_cast<float>(opt.fps), mode};
  std::size_t file_bytes = 0;
  {
    std::ofstream sink = open_output(opt.output, true);
    file_bytes = write_stream(header, q.indices, sink);
  }
  if (!opt.recon.empty()) {
    std::ofstream rec = open_output(opt.recon, false);
    io::write_frames(q.reconstructions, rec);
  }

  const FramePacker packer(cfg, mode);
  const double fps = static_cast<double>(header.fps);
  const std::size_t payload_bytes = frames.size() * packer.block_bytes();

  ordered_json j;
  j["command"] = "encode";
  j["frames"] = frames.size();
  j["config"] = config_json(cfg, fps);
  j["config"]["packing"] = packing_name(mode);
  j["config"]["seed"] = seed;
  j["rmse"] = q.report.mean_rmse;
  j["cumulative_rmse_by_residual"] = q.report.cumulative_rmse_by_residual;
  j["bitrate_bps"] = bitrate(cfg, fps);
  j["payload_bps"] = static_cast<double>(packer.block_bits()) * fps;
  j["bits_per_frame"] = packer.block_bits();
  j["block_bytes"] = packer.block_bytes();
  j["payload_bytes"] = payload_bytes;
  j["file_bytes"] = file_bytes;
  j["byte_aligned_bps"] = static_cast<double>(packer.block_bytes() * 8) * fps;
  j["utilization"] = utilization_json(utilization(q.indices, cfg));
  out << j.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- decode

int cmd_decode(const std::string& input, const std::string& output, std::ostream& out) {
  const DecodedStream stream = load_stream(input);
  const GrfsqConfig& cfg = stream.header.config;
  FrameSeq frames;
  frames.reserve(stream.tokens.frames());
  for (std::size_t t = 0; t < stream.tokens.frames(); ++t) frames.push_back(grfsq_dequantize(stream.tokens.frame(t), cfg));
  {
    std::ofstream sink = open_output(output, false);
    io::write_frames(frames, sink);
  }
  ordered_json j;
  j["command"] = "decode";
  j["frames"] = frames.size();
  j["config"] = config_json(cfg, static_cast<double>(stream.header.fps));
  j["config"]["packing"] = packing_name(stream.header.packing);
  out << j.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- ablate

struct AblateOptions {
  std::string input;
  std::string schemes = "vq,gvq,rvq,grvq,grfsq";
  std::size_t vq_k = 8196;
  std::size_t gvq_groups = 32;
  std::size_t gvq_k = 1024;
  std::size_t rvq_residuals = 32;
  std::size_t rvq_k = 1024;
  std::size_t grvq_groups = 12;
  std::size_t grvq_residuals = 4;
  std::size_t grvq_k = 1024;
  std::size_t groups = 12;
  std::size_t residuals = 4;
  std::string levels = "5,5,5,5";
  std::string projection = "pca";
  double fps = 25.0;
  std::size_t kmeans_iters = 10;
  double train_fraction = 0.8;
  std::optional<std::uint64_t> seed;
  std::string format = "json";
  std::string output;
  std::string save_codebooks;
};

struct AblationRow {
  std::string scheme;
  std::size_t groups = 0;
  std::size_t residuals = 0;
  std::uint64_t codebook_size = 0;
  double bitrate_bps = 0.0;
  double rmse = 0.0;
  double utilization_percent = 0.0;
};

double mean_rmse(const FrameSeq& a, const FrameSeq& b) {
  if (a.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) acc += detail::rmse(a[t], b[t]);
  return acc / static_cast<double>(a.size());
}

AblationRow run_baseline(const FrameSeq& train, const FrameSeq& eval, const BaselineConfig& cfg, double fps,
                         const std::string& save_dir) {
  const BaselineModel model = fit_baseline(train, cfg);
  if (!save_dir.empty()) {
    std::filesystem::create_directories(save_dir);
    for (std::size_t g = 0; g < cfg.groups; ++g) {
      for (std::size_t r = 0; r < cfg.residuals; ++r) {
        const std::string name = std::string(to_string(cfg.scheme)) + "_g" + std::to_string(g) + "_r" +
                                 std::to_string(r) + ".cb";
        std::ofstream f = open_output((std::filesystem::path(save_dir) / name).string(), true);
        save_codebook(model.codebook(g, r), f);
      }
    }
  }
  const BaselineEncoding enc = baseline_encode(eval, model);
  return AblationRow{std::string(to_string(cfg.scheme)), cfg.groups, cfg.residuals, cfg.k,
                     baseline_bitrate(cfg, fps), mean_rmse(eval, enc.reconstructions),
                     baseline_utilization(enc.indices, cfg).mean_percent};
}

int cmd_ablate(const AblateOptions& opt, std::ostream& out) {
  const FrameSeq frames = io::read_frames(opt.input);
  detail::require(!frames.empty(), ErrorCode::InvalidInput, "ablation needs at least one frame");
  detail::require(opt.train_fraction > 0.0 && opt.train_fraction <= 1.0, ErrorCode::InvalidConfig,
                  "--train-fraction must be in (0, 1]");
  detail::require(std::isfinite(opt.fps) && opt.fps > 0.0, ErrorCode::InvalidConfig, "--fps must be positive");
  const std::uint64_t seed = resolve_seed(opt.seed);

  // Leading frames train the codebooks; the remainder is scored. A fraction
  // of 1 scores on the training frames themselves.
  std::size_t n_train = static_cast<std::size_t>(std::floor(opt.train_fraction * static_cast<double>(frames.size())));
  n_train = std::max<std::size_t>(1, std::min(n_train, frames.size()));
  const FrameSeq train(frames.begin(), frames.begin() + static_cast<std::ptrdiff_t>(n_train));
  const FrameSeq eval = n_train == frames.size() ? train : FrameSeq(frames.begin() + static_cast<std::ptrdiff_t>(n_train), frames.end());

  std::vector<AblationRow> rows;
  std::stringstream ss(opt.schemes);
  std::string name;
  while (std::getline(ss, name, ',')) {
    BaselineConfig b;
    b.kmeans_iters = opt.kmeans_iters;
    b.seed = seed;
    if (name == "vq") {
      b.scheme = Scheme::VQ;
      b.k = opt.vq_k;
    } else if (name == "gvq") {
      b.scheme = Scheme::GVQ;
      b.groups = opt.gvq_groups;
      b.k = opt.gvq_k;
    } else if (name == "rvq") {
      b.scheme = Scheme::RVQ;
      b.residuals = opt.rvq_residuals;
      b.k = opt.rvq_k;
    } else if (name == "grvq") {
      b.scheme = Scheme::GRVQ;
      b.groups = opt.grvq_groups;
      b.residuals = opt.grvq_residuals;
      b.k = opt.grvq_k;
    } else if (name == "grfsq") {
      GrfsqConfig cfg = GrfsqConfig::make(opt.groups, opt.residuals, parse_levels(opt.levels), frames.front().size());
      if (opt.projection == "pca") {
        cfg = calibrate_projections(train, cfg);
      } else {
        detail::require(opt.projection == "coordinate", ErrorCode::InvalidConfig,
                        "--projection must be pca or coordinate");
      }
      const SequenceQuantization q = quantize_sequence(eval, cfg);
      rows.push_back(AblationRow{"GRFSQ", cfg.num_groups(), cfg.num_residuals(), cfg.codebook_size(),
                                 bitrate(cfg, opt.fps), q.report.mean_rmse, utilization(q.indices, cfg).mean_percent});
      continue;
    } else {
      detail::fail(ErrorCode::InvalidConfig, "unknown scheme '" + name + "'");
    }
    rows.push_back(run_baseline(train, eval, b, opt.fps, opt.save_codebooks));
  }

  std::ostringstream report;
  if (opt.format == "csv") {
    report << "scheme,groups,residuals,codebook_size,bitrate_bps,rmse,utilization_percent\n";
    for (const AblationRow& r : rows) {
      report << r.scheme << ',' << r.groups << ',' << r.residuals << ',' << r.codebook_size << ','
             << ordered_json(r.bitrate_bps).dump() << ',' << ordered_json(r.rmse).dump() << ','
             << ordered_json(r.utilization_percent).dump() << '\n';
    }
  } else {
    detail::require(opt.format == "json", ErrorCode::InvalidConfig, "--format must be json or csv");
    ordered_json j;
    j["command"] = "ablate";
    j["train_frames"] = train.size();
    j["eval_frames"] = eval.size();
    j["seed"] = seed;
    j["rows"] = ordered_json::array();
    for (const AblationRow& r : rows) {
      ordered_json row;
      row["scheme"] = r.scheme;
      row["groups"] = r.groups;
      row["residuals"] = r.residuals;
      row["codebook_size"] = r.codebook_size;
      row["bitrate_bps"] = r.bitrate_bps;
      row["rmse"] = r.rmse;
      row["utilization_percent"] = r.utilization_percent;
      j["rows"].push_back(row);
    }
    report << j.dump(2) << '\n';
  }
  if (!opt.output.empty()) {
    std::ofstream f = open_output(opt.output, false);
    f << report.str();
  }
  out << report.str();
  return kExitOk;
}

// ---------------------------------------------------------------- schedule-sim

struct ScheduleOptions {
  std::string tokens;
  std::string controls;
  std::string predictor = "uniform";
  std::string train;
  std::string train_tokens;
  std::string target;
  std::size_t groups = 12;
  std::size_t residuals = 4;
  std::string levels = "5,5,5,5";
  std::uint32_t vocab = kDefaultSpeechVocab;
  std::string global_feature;
  std::string output;
  std::optional<std::uint64_t> seed;
};

int cmd_schedule_sim(const ScheduleOptions& opt, std::ostream& out) {
  GenerationRequest req;
  req.speech = io::read_speech_tokens(opt.tokens, opt.vocab);
  req.controls = io::read_controls(opt.controls);
  req.global_feature = parse_reals(opt.global_feature);
  detail::require(req.controls.size() == req.speech.size(), ErrorCode::InvalidInput,
                  "control track has " + std::to_string(req.controls.size()) + " frames, speech tokens " +
                      std::to_string(req.speech.size()));
  const std::uint64_t seed = resolve_seed(opt.seed);

  std::optional<DecodedStream> target;
  GrfsqConfig cfg;
  if (!opt.target.empty()) {
    target = load_stream(opt.target);
    cfg = target->header.config;
    detail::require(target->tokens.frames() == req.speech.size(), ErrorCode::InvalidInput,
                    "target stream length does not match the speech tokens");
  } else {
    const LevelSpec levels = parse_levels(opt.levels);
    cfg = GrfsqConfig::make(opt.groups, opt.residuals, levels, opt.groups * levels.dims());
  }
  req.groups = cfg.num_groups();
  req.layers = cfg.num_residuals();
  req.classes = static_cast<std::size_t>(cfg.codebook_size());

  std::unique_ptr<Predictor> predictor;
  if (opt.predictor == "uniform") {
    predictor = std::make_unique<UniformPredictor>(req.classes);
  } else if (opt.predictor == "echo") {
    detail::require(target.has_value(), ErrorCode::InvalidConfig, "the echo predictor needs --target");
    predictor = std::make_unique<EchoPredictor>(target->tokens, req.classes);
  } else if (opt.predictor == "bigram") {
    detail::require(!opt.train.empty() && !opt.train_tokens.empty(), ErrorCode::InvalidConfig,
                    "the bigram predictor needs --train and --train-tokens");
    const DecodedStream corpus = load_stream(opt.train);
    detail::require(corpus.header.config.num_groups() == req.groups &&
                        corpus.header.config.num_residuals() == req.layers &&
                        corpus.header.config.codebook_size() == cfg.codebook_size(),
                    ErrorCode::ConfigMismatch, "training stream config does not match");
    auto bigram = std::make_unique<BigramPredictor>(req.layers, req.groups, req.classes);
    bigram->train(io::read_speech_tokens(opt.train_tokens, opt.vocab), corpus.tokens);
    predictor = std::move(bigram);
  } else {
    detail::fail(ErrorCode::InvalidConfig, "unknown predictor '" + opt.predictor + "'");
  }

  const IndexTensor generated = generate(*predictor, req);
  const std::vector<double> per_layer = layer_nll(*predictor, req, target ? target->tokens : generated);
  double total = 0.0;
  for (double v : per_layer) total += v;

  if (!opt.output.empty()) {
    const StreamHeader header{cfg, static_cast<std::uint32_t>(generated.frames()),
                              static_cast<float>(req.speech.rate), PackingMode::MixedRadix};
    std::ofstream sink = open_output(opt.output, true);
    write_stream(header, generated, sink);
  }

  ordered_json j;
  j["command"] = "schedule-sim";
  j["predictor"] = opt.predictor;
  j["frames"] = req.speech.size();
  j["groups"] = req.groups;
  j["layers"] = req.layers;
  j["classes"] = req.classes;
  j["passes"] = build_schedule(req.speech.size(), req.layers).passes.size();
  j["seed"] = seed;
  j["nll_reference"] = target ? "target" : "generated";
  j["layer_nll"] = per_layer;
  j["total_nll"] = total;
  j["uniform_layer_nll"] =
      static_cast<double>(req.groups * req.speech.size()) * std::log(static_cast<double>(req.classes));
  out << j.dump(2) << '\n';
  return kExitOk;
}

void add_grfsq_flags(CLI::App* cmd, std::size_t& groups, std::size_t& residuals, std::string& levels) {
  cmd->add_option("--groups", groups, "number of groups G");
  cmd->add_option("--residuals", residuals, "number of residual layers R");
  cmd->add_option("--levels", levels, "comma-separated FSQ levels");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Group residual FSQ codec and analysis tool", "grfsq"};
  app.require_subcommand(1);

  EncodeOptions enc;
  auto* encode = app.add_subcommand("encode", "quantize a frame file into a .grfq stream");
  encode->add_option("input", enc.input, "frames (JSON-lines or CSV)")->required();
  encode->add_option("output", enc.output, "output .grfq path")->required();
  add_grfsq_flags(encode, enc.groups, enc.residuals, enc.levels);
  encode->add_option("--fps", enc.fps, "frame rate");
  encode->add_option("--packing", enc.packing, "mixed | fixed");
  encode->add_option("--calibrate", enc.calibrate, "frames used to fit per-group PCA projections");
  encode->add_option("--seed", enc.seed, "seed (falls back to GRFQ_SEED)");
  encode->add_option("--dim", enc.dim, "frame dimension when the input is empty");
  encode->add_option("--threads", enc.threads, "worker threads for quantization");
  encode->add_option("--recon", enc.recon, "also write the encoder's reconstructions (JSON-lines)");

  std::string dec_in, dec_out;
  auto* decode = app.add_subcommand("decode", "reconstruct frames from a .grfq stream");
  decode->add_option("input", dec_in, "input .grfq")->required();
  decode->add_option("output", dec_out, "output frames (JSON-lines)")->required();

  AblateOptions abl;
  auto* ablate = app.add_subcommand("ablate", "compare quantizer designs on the same data");
  ablate->add_option("input", abl.input, "frames (JSON-lines or CSV)")->required();
  ablate->add_option("--schemes", abl.schemes, "comma list of vq,gvq,rvq,grvq,grfsq");
  ablate->add_option("--vq-k", abl.vq_k);
  ablate->add_option("--gvq-groups", abl.gvq_groups);
  ablate->add_option("--gvq-k", abl.gvq_k);
  ablate->add_option("--rvq-residuals", abl.rvq_residuals);
  ablate->add_option("--rvq-k", abl.rvq_k);
  ablate->add_option("--grvq-groups", abl.grvq_groups);
  ablate->add_option("--grvq-residuals", abl.grvq_residuals);
  ablate->add_option("--grvq-k", abl.grvq_k);
  add_grfsq_flags(ablate, abl.groups, abl.residuals, abl.levels);
  ablate->add_option("--projection", abl.projection, "GRFSQ projection: pca | coordinate");
  ablate->add_option("--fps", abl.fps);
  ablate->add_option("--kmeans-iters", abl.kmeans_iters);
  ablate->add_option("--train-fraction", abl.train_fraction, "leading fraction of frames used for fitting");
  ablate->add_option("--seed", abl.seed, "seed (falls back to GRFQ_SEED)");
  ablate->add_option("--format", abl.format, "json | csv");
  ablate->add_option("--output", abl.output, "also write the table to this path");
  ablate->add_option("--save-codebooks", abl.save_codebooks, "directory for fitted codebook blobs");

  ScheduleOptions sch;
  auto* schedule = app.add_subcommand("schedule-sim", "run layered token generation");
  schedule->add_option("tokens", sch.tokens, "speech tokens, one integer per line")->required();
  schedule->add_option("controls", sch.controls, "control track (JSON-lines with h, g, b)")->required();
  schedule->add_option("--predictor", sch.predictor, "uniform | bigram | echo");
  schedule->add_option("--train", sch.train, ".grfq stream the bigram predictor is fitted on");
  schedule->add_option("--train-tokens", sch.train_tokens, "speech tokens aligned with --train");
  schedule->add_option("--target", sch.target, ".grfq stream scored against (and echoed)");
  add_grfsq_flags(schedule, sch.groups, sch.residuals, sch.levels);
  schedule->add_option("--vocab", sch.vocab, "speech vocabulary size");
  schedule->add_option("--fg", sch.global_feature, "global feature, comma-separated reals");
  schedule->add_option("--output", sch.output, "write generated tokens as a .grfq stream");
  schedule->add_option("--seed", sch.seed, "seed (falls back to GRFQ_SEED)");

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.emplace_back("grfsq");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*encode) return cmd_encode(enc, out);
    if (*decode) return cmd_decode(dec_in, dec_out, out);
    if (*ablate) return cmd_ablate(abl, out);
    if (*schedule) return cmd_schedule_sim(sch, out);
  } catch (const Error& e) {
    err << "grfsq: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "grfsq: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitConfig;
}

}  // namespace grfsq::cli
