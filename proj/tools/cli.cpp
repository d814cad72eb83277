// Copyright 2026 The PSIC Authors. All rights reserved.
//
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

#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "psic/bitstream.hpp"
#include "psic/checkpoint.hpp"
#include "psic/data.hpp"
#include "psic/errors.hpp"
#include "psic/uaeo.hpp"

namespace psic::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::optional<fs::path> config;
  std::optional<fs::path> out;
  std::optional<std::uint64_t> seed;
  std::vector<int> lambda_indices;
  std::optional<std::string> mode_key;
  std::optional<fs::path> checkpoint_dir;

  // Subcommand arguments.
  int count = 2000;
  fs::path manifest;
  fs::path input;
  std::optional<fs::path> checkpoint;
  std::optional<fs::path> oracle;
  bool baseline = false;
  bool naive = false;
  bool resume = false;
  int audit_batch = 32;
  std::optional<Real> audit_scale;
};

fs::path checkpoint_dir(const Options& o) {
  if (o.checkpoint_dir) return *o.checkpoint_dir;
  if (const char* env = std::getenv(kCheckpointDirEnv); env && *env) return env;
  return "checkpoints";
}

fs::path require_out(const Options& o, const char* what) {
  if (!o.out) throw ConfigError(fmt::format("--out is required for {}", what));
  return *o.out;
}

fs::path oracle_path(const Options& o) {
  return o.oracle ? *o.oracle : checkpoint_dir(o) / "oracle.ckpt";
}

int single_lambda(const Options& o, const RunConfig& rc) {
  if (o.lambda_indices.size() > 1) throw ConfigError("expected a single --lambda-index");
  return o.lambda_indices.empty() ? rc.train.codec.lambda_index : o.lambda_indices.front();
}

fs::path codec_path(const Options& o, int lambda_index, bool baseline = false) {
  if (o.checkpoint) return *o.checkpoint;
  return checkpoint_dir(o) / checkpoint::codec_checkpoint_name(lambda_index, 2, baseline);
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!(out << text)) throw DataError(fmt::format("cannot write {}", path.string()));
}

// ------------------------------------------------------------- commands

int cmd_gen_data(const Options& o, std::ostream& out) {
  const fs::path manifest =
      data::generate_shapes(o.count, o.seed.value_or(1), require_out(o, "gen-data"));
  fmt::print(out, "{}\n", manifest.string());
  return kOk;
}

int cmd_train_oracle(const Options& o, const RunConfig& rc, std::ostream& out) {
  const auto dataset = data::load_dataset(o.manifest);
  const auto split = data::split_dataset(dataset.size(), rc.train.heldout_fraction);
  oracle::SurrogateConfig cfg = rc.oracle;
  if (o.seed) cfg.seed = *o.seed;
  auto model = oracle::train_surrogate(dataset, split.train, cfg, [&](const oracle::EpochStats& s) {
    fmt::print(out, "{}\n", json{{"epoch", s.epoch}, {"loss", s.mean_loss}}.dump());
  });
  const fs::path path = o.out ? *o.out : oracle_path(o);
  checkpoint::save_oracle(path, *model);
  fmt::print(out, "{}\n", path.string());
  return kOk;
}

int cmd_train(const Options& o, const RunConfig& rc, std::ostream& out) {
  const auto dataset = data::load_dataset(o.manifest);
  auto oracle = checkpoint::load_oracle(oracle_path(o));
  train::TrainConfig cfg = rc.train;
  if (o.seed) cfg.seed = *o.seed;
  if (o.baseline) cfg.baseline = true;
  if (o.naive) cfg.loss = train::EncryptionLoss::kNaive;
  std::vector<int> lambdas = o.lambda_indices;
  if (lambdas.empty()) {
    for (int i = 0; i < static_cast<int>(cfg.codec.lambdas.size()); ++i) lambdas.push_back(i);
  }
  const fs::path dir = o.out ? *o.out : checkpoint_dir(o);

  for (int li : lambdas) {
    train::TrainConfig c = cfg;
    c.codec.lambda_index = li;
    c.validate();
    train::ScheduleHooks hooks;
    hooks.output_dir = dir;
    if (o.mode_key) hooks.key = checkpoint::make_key_digest(*o.mode_key, c.seed);
    hooks.on_epoch = [&](const train::EpochRecord& r) {
      json line = train::to_json(r);
      line["lambda_index"] = li;
      fmt::print(out, "{}\n", line.dump());
      out.flush();
    };
    std::unique_ptr<codec::CodecModel> model;
    if (o.resume) {
      for (int stage : {2, 1}) {
        const fs::path p = dir / checkpoint::codec_checkpoint_name(li, stage, c.baseline);
        if (!fs::exists(p)) continue;
        auto loaded = checkpoint::load_codec(p);
        if (json(loaded.model->config()) != json(c.codec)) {
          throw ConfigError(fmt::format("{} was trained with a different codec config", p.string()));
        }
        model = std::move(loaded.model);
        hooks.resume = train::ScheduleHooks::Resume{loaded.meta.train_state, loaded.extras};
        if (!hooks.key) hooks.key = loaded.meta.key;
        break;
      }
    }
    if (!model) model = std::make_unique<codec::CodecModel>(c.codec, c.seed);
    train::run_schedule(*model, *oracle, c, dataset, hooks);
    fmt::print(out, "{}\n", (dir / checkpoint::codec_checkpoint_name(li, 2, c.baseline)).string());
  }
  return kOk;
}

int cmd_encode(const Options& o, const RunConfig& rc, std::ostream& out) {
  const auto loaded = checkpoint::load_codec(codec_path(o, single_lambda(o, rc)));
  const Tensor image = data::load_image(o.input);
  const auto id = bitstream::identify(*loaded.model);
  const auto container = bitstream::compress(image, *loaded.model, id);
  const auto bytes = container.bytes();
  const fs::path path = require_out(o, "encode");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError(fmt::format("cannot write {}", path.string()));
  fmt::print(out, "bpp {:.6f}\n", bitstream::measured_bpp(container));
  return kOk;
}

int cmd_decode(const Options& o, const RunConfig& rc, std::ostream& out) {
  const auto loaded = checkpoint::load_codec(codec_path(o, single_lambda(o, rc)));
  const auto bytes = read_bytes(o.input);
  const auto container = bitstream::Container::parse(bytes);
  const cltg::Mode mode = checkpoint::mode_for_key(loaded.meta.key, o.mode_key);
  const Tensor image =
      bitstream::decompress(container, *loaded.model, bitstream::identify(*loaded.model), mode);
  data::save_image(require_out(o, "decode"), image);
  fmt::print(out, "mode {}\n", mode == cltg::Mode::kFull ? "full" : "encrypted");
  return kOk;
}

int cmd_eval(const Options& o, const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const auto dataset = data::load_dataset(o.manifest);
  const auto split = data::split_dataset(dataset.size(), rc.eval.heldout_fraction);
  const auto oracle = checkpoint::load_oracle(oracle_path(o));
  const fs::path dir = require_out(o, "eval");
  std::vector<int> lambdas = o.lambda_indices;
  if (lambdas.empty()) lambdas.push_back(rc.train.codec.lambda_index);
  if (o.checkpoint && lambdas.size() > 1) {
    throw ConfigError("--checkpoint selects one model; drop it to evaluate several lambdas");
  }

  std::vector<eval::EvalReport> reports;
  for (int li : lambdas) {
    auto model = checkpoint::load_codec(codec_path(o, li)).model;
    if (model->config().lambda_index != li && !o.checkpoint) {
      throw DataError(fmt::format("checkpoint for lambda index {} holds index {}", li,
                                  model->config().lambda_index));
    }
    std::unique_ptr<codec::CodecModel> baseline;
    const fs::path base_path =
        checkpoint_dir(o) / checkpoint::codec_checkpoint_name(model->config().lambda_index, 2, true);
    if (fs::exists(base_path)) {
      baseline = checkpoint::load_codec(base_path).model;
    } else {
      fmt::print(err, "warning: no baseline at {}; ASR is measured against originals\n",
                 base_path.string());
    }
    auto report = eval::evaluate(*model, baseline.get(), *oracle, dataset, split.heldout, rc.eval);
    const fs::path path = dir / fmt::format("report_l{}.json", report.lambda_index);
    write_text(path, json(report).dump(2) + "\n");
    fmt::print(out, "{}\n", path.string());
    reports.push_back(std::move(report));
  }
  if (reports.size() >= 2) {
    for (const auto& p : eval::export_curves(reports, dir / "curves", [&](const std::string& w) {
           fmt::print(err, "warning: {}\n", w);
         })) {
      fmt::print(out, "{}\n", p.string());
    }
  }
  return kOk;
}

int cmd_audit(const Options& o, const RunConfig& rc, std::ostream& out) {
  const auto dataset = data::load_dataset(o.manifest);
  const auto oracle = checkpoint::load_oracle(oracle_path(o));
  const uaeo::Objective objective(o.audit_scale.value_or(rc.train.uaeo_scale));
  const int k = o.audit_batch;
  if (k < 2) throw ConfigError(fmt::format("audit batch {} < 2", k));
  if (dataset.size() < static_cast<std::size_t>(k)) {
    throw DataError(fmt::format("audit needs at least {} pairs, manifest has {}", k, dataset.size()));
  }

  struct Row {
    int pair;
    Real u_ii;
    int target;
    Real u_in;
  };
  std::vector<Row> rows;
  for (std::size_t b = 0; b + k <= dataset.size(); b += k) {
    std::vector<int> idx(k);
    for (int i = 0; i < k; ++i) idx[i] = static_cast<int>(b) + i;
    const auto texts = dataset.captions(idx);
    const Matrix s =
        oracle->embed_images(dataset.batch(idx)) * oracle->embed_texts(texts).transpose();
    const auto table = objective.table(s);
    for (int i = 0; i < k; ++i) {
      const int t = table.targets[i];
      rows.push_back({idx[i], table.mass(i, i), idx[t], table.mass(i, t)});
    }
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.u_ii > b.u_ii; });
  std::string text;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    text += json{{"rank", r},
                 {"pair_id", rows[r].pair},
                 {"u_ii", rows[r].u_ii},
                 {"selected_text", rows[r].target},
                 {"selected_caption", dataset.manifest.records[rows[r].target].caption},
                 {"u_in", rows[r].u_in}}
                .dump() +
            "\n";
  }
  if (o.out) {
    write_text(*o.out, text);
    fmt::print(out, "{}\n", o.out->string());
  } else {
    out << text;
  }
  return kOk;
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  static const std::set<std::string> known = {"train", "oracle", "eval"};
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError(fmt::format("unknown config section '{}'", key));
  }
  RunConfig rc;
  if (j.contains("train")) rc.train = j.at("train").get<train::TrainConfig>();
  if (j.contains("oracle")) {
    try {
      rc.oracle = j.at("oracle").get<oracle::SurrogateConfig>();
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("bad oracle config: {}", e.what()));
    }
  }
  if (j.contains("eval")) rc.eval = j.at("eval").get<eval::EvalConfig>();
  return rc;
}

RunConfig load_run_config(const std::optional<fs::path>& path) {
  if (!path) return {};
  std::ifstream in(*path);
  if (!in) throw ConfigError(fmt::format("cannot open config {}", path->string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path->string(), e.what()));
  }
  return parse_run_config(j);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Privacy-shielded image codec"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run configuration");
    sub->add_option("--out", o.out, "Output path");
    sub->add_option("--seed", o.seed, "Seed overriding the configuration");
    sub->add_option("--checkpoint-dir", o.checkpoint_dir,
                    fmt::format("Checkpoint directory (default ${})", kCheckpointDirEnv));
  };
  auto needs_manifest = [&](CLI::App* sub) {
    sub->add_option("--manifest", o.manifest, "Dataset manifest")->required();
    sub->add_option("--oracle", o.oracle, "Oracle checkpoint");
  };

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic shapes corpus");
  common(gen);
  gen->add_option("--count", o.count, "Number of image-caption pairs");

  auto* train_oracle = app.add_subcommand("train-oracle", "Train the surrogate similarity oracle");
  common(train_oracle);
  train_oracle->add_option("--manifest", o.manifest, "Dataset manifest")->required();

  auto* train = app.add_subcommand("train", "Train codecs, one per lambda index");
  common(train);
  needs_manifest(train);
  train->add_option("--lambda-index", o.lambda_indices, "Lambda indices (default: all)");
  train->add_option("--mode-key", o.mode_key, "Key that unlocks full-mode decoding");
  train->add_flag("--baseline", o.baseline, "Perception-only reference codec");
  train->add_flag("--naive", o.naive, "Naive paired-similarity encryption loss");
  train->add_flag("--resume", o.resume, "Continue from the latest checkpoint");

  auto* encode = app.add_subcommand("encode", "Compress a PPM image");
  common(encode);
  encode->add_option("input", o.input, "Input image")->required();
  encode->add_option("--checkpoint", o.checkpoint, "Codec checkpoint");
  encode->add_option("--lambda-index", o.lambda_indices, "Lambda index")->expected(1);

  auto* decode = app.add_subcommand("decode", "Decompress a .psic file");
  common(decode);
  decode->add_option("input", o.input, "Input container")->required();
  decode->add_option("--checkpoint", o.checkpoint, "Codec checkpoint");
  decode->add_option("--lambda-index", o.lambda_indices, "Lambda index")->expected(1);
  decode->add_option("--mode-key", o.mode_key, "Key for full-mode decoding");

  auto* evaluate = app.add_subcommand("eval", "Evaluate trained codecs");
  common(evaluate);
  needs_manifest(evaluate);
  evaluate->add_option("--checkpoint", o.checkpoint, "Codec checkpoint");
  evaluate->add_option("--lambda-index", o.lambda_indices, "Lambda indices");

  auto* audit = app.add_subcommand("audit-uncertainty", "Rank pairs by uncertainty mass");
  common(audit);
  needs_manifest(audit);
  audit->add_option("--batch", o.audit_batch, "Pairs per similarity matrix");
  audit->add_option("--scale", o.audit_scale, "Evidence scale factor");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    const RunConfig rc = load_run_config(o.config);
    if (*gen) return cmd_gen_data(o, out);
    if (*train_oracle) return cmd_train_oracle(o, rc, out);
    if (*train) return cmd_train(o, rc, out);
    if (*encode) return cmd_encode(o, rc, out);
    if (*decode) return cmd_decode(o, rc, out);
    if (*evaluate) return cmd_eval(o, rc, out, err);
    if (*audit) return cmd_audit(o, rc, out);
  } catch (const ConfigError& e) {
    fmt::print(err, "config error: {}\n", e.what());
    return kConfigError;
  } catch (const DomainError& e) {
    fmt::print(err, "config error: {}\n", e.what());
    return kConfigError;
  } catch (const ContainerError& e) {
    fmt::print(err, "container error: {}\n", e.what());
    return kContainerError;
  } catch (const DivergenceError& e) {
    fmt::print(err, "training diverged: {}\n", e.what());
    return kDivergence;
  } catch (const DataError& e) {
    fmt::print(err, "data error: {}\n", e.what());
    return kDataError;
  } catch (const DimensionError& e) {
    fmt::print(err, "data error: {}\n", e.what());
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    fmt::print(err, "data error: {}\n", e.what());
    return kDataError;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kOtherError;
  }
  return kOtherError;
}

}  // namespace psic::cli
