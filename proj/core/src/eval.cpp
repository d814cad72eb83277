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

#include "psic/eval.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "psic/bitstream.hpp"
#include "psic/errors.hpp"
#include "psic/metrics.hpp"

namespace psic::eval {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kChunk = 32;

Tensor reconstruct_all(const Tensor& x, cltg::Mode mode, const codec::CodecModel& model) {
  Tensor out(x.shape());
  const std::size_t per_image = x.size() / x.shape().n;
  for (int b = 0; b < x.shape().n; b += kChunk) {
    const int count = std::min(kChunk, x.shape().n - b);
    const Tensor r = codec::reconstruct(x.batch_slice(b, count), mode, model);
    std::memcpy(out.data() + b * per_image, r.data(), r.size() * sizeof(Real));
  }
  return out;
}

template <std::size_t N>
std::vector<std::string> prompts(const std::array<std::string_view, N>& words,
                                 const std::string& tmpl) {
  std::vector<std::string> out;
  for (auto w : words) out.push_back(fmt::format(fmt::runtime(tmpl), w));
  return out;
}

Real mean(const std::vector<Real>& v) {
  Real s = 0;
  for (Real x : v) s += x;
  return v.empty() ? 0 : s / static_cast<Real>(v.size());
}

}  // namespace

void to_json(json& j, const EvalConfig& c) {
  j = {{"gallery", c.gallery},
       {"prompt_template", c.prompt_template},
       {"heldout_fraction", c.heldout_fraction}};
}

void from_json(const json& j, EvalConfig& c) {
  const EvalConfig d;
  try {
    c.gallery = j.value("gallery", d.gallery);
    c.prompt_template = j.value("prompt_template", d.prompt_template);
    c.heldout_fraction = j.value("heldout_fraction", d.heldout_fraction);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("bad eval config: {}", e.what()));
  }
  if (c.gallery < 1) throw ConfigError(fmt::format("gallery {} < 1", c.gallery));
  if (c.prompt_template.find("{}") == std::string::npos) {
    throw ConfigError("prompt template lacks a {} placeholder");
  }
}

void to_json(json& j, const EvalReport& r) {
  json images = json::array();
  for (const auto& im : r.images) {
    images.push_back({{"index", im.index},
                      {"bpp", im.bpp},
                      {"psnr_full", im.psnr_full},
                      {"psnr_encrypted", im.psnr_encrypted}});
  }
  json tasks = json::object();
  for (const auto& [name, t] : r.tasks) {
    tasks[name] = {{"accuracy", t.accuracy}, {"asr", t.asr ? json(*t.asr) : json(nullptr)}};
  }
  j = {{"lambda_index", r.lambda_index},
       {"config", r.config},
       {"asr_reference", r.asr_reference},
       {"mean_bpp", r.mean_bpp},
       {"psnr_full", r.psnr_full},
       {"psnr_encrypted", r.psnr_encrypted},
       {"psnr_baseline", r.psnr_baseline ? json(*r.psnr_baseline) : json(nullptr)},
       {"bpp_baseline", r.bpp_baseline ? json(*r.bpp_baseline) : json(nullptr)},
       {"tasks", tasks},
       {"images", images}};
}

void from_json(const json& j, EvalReport& r) {
  auto opt = [&](const char* key) -> std::optional<Real> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<Real>();
  };
  try {
    r.lambda_index = j.at("lambda_index").get<int>();
    r.config = j.value("config", json::object());
    r.asr_reference = j.at("asr_reference").get<std::string>();
    r.mean_bpp = j.at("mean_bpp").get<Real>();
    r.psnr_full = j.at("psnr_full").get<Real>();
    r.psnr_encrypted = j.at("psnr_encrypted").get<Real>();
    r.psnr_baseline = opt("psnr_baseline");
    r.bpp_baseline = opt("bpp_baseline");
    r.tasks.clear();
    for (const auto& [name, t] : j.at("tasks").items()) {
      TaskMetrics m;
      m.accuracy = t.at("accuracy").get<std::map<std::string, Real>>();
      if (!t.at("asr").is_null()) m.asr = t.at("asr").get<Real>();
      r.tasks[name] = std::move(m);
    }
    r.images.clear();
    for (const auto& im : j.at("images")) {
      r.images.push_back({im.at("index").get<int>(), im.at("bpp").get<Real>(),
                          im.at("psnr_full").get<Real>(), im.at("psnr_encrypted").get<Real>()});
    }
  } catch (const json::exception& e) {
    throw DataError(fmt::format("bad evaluation report: {}", e.what()));
  }
}

std::map<std::string, std::vector<bool>> task_flags(const oracle::SimilarityOracle& oracle,
                                                    const Tensor& images,
                                                    const data::Dataset& data,
                                                    std::span<const int> indices,
                                                    const EvalConfig& config) {
  using metrics::Direction;
  const auto captions = data.captions(indices);
  std::vector<int> colors, shapes, positions;
  for (int i : indices) {
    const auto& a = data.manifest.records.at(i).attributes;
    colors.push_back(a.color);
    shapes.push_back(a.shape);
    positions.push_back(a.position);
  }
  std::map<std::string, std::vector<bool>> out;
  out["t2i"] = metrics::recall_at_1_flags(oracle, images, captions, Direction::kTextToImage,
                                          config.gallery);
  out["i2t"] = metrics::recall_at_1_flags(oracle, images, captions, Direction::kImageToText,
                                          config.gallery);
  const auto shape_flags = metrics::classification_flags(
      oracle, images, shapes, prompts(data::kShapes, config.prompt_template));
  const auto color_flags = metrics::classification_flags(
      oracle, images, colors, prompts(data::kColors, config.prompt_template));
  const auto position_flags = metrics::classification_flags(
      oracle, images, positions, prompts(data::kPositions, config.prompt_template));
  std::vector<bool> all(indices.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    all[i] = shape_flags[i] && color_flags[i] && position_flags[i];
  }
  out["classify"] = shape_flags;
  out["attributes"] = std::move(all);
  return out;
}

EvalReport evaluate(codec::CodecModel& model, codec::CodecModel* baseline,
                    const oracle::SimilarityOracle& oracle, const data::Dataset& data,
                    std::span<const int> indices, const EvalConfig& config) {
  if (indices.empty()) throw DataError("evaluation set is empty");
  EvalReport report;
  report.lambda_index = model.config().lambda_index;
  report.config = {{"codec", model.config()}, {"eval", config}};
  report.asr_reference = baseline ? kModeBaseline : kModeOriginal;

  const Tensor originals = data.batch(indices);
  const Tensor full = reconstruct_all(originals, cltg::Mode::kFull, model);
  const Tensor encrypted = reconstruct_all(originals, cltg::Mode::kEncrypted, model);
  const auto psnr_full = metrics::psnr_per_image(full, originals);
  const auto psnr_enc = metrics::psnr_per_image(encrypted, originals);

  const auto id = bitstream::identify(model);
  std::vector<Real> bpps;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto c = bitstream::compress(originals.batch_slice(static_cast<int>(i), 1), model, id);
    bpps.push_back(bitstream::measured_bpp(c));
    report.images.push_back({indices[i], bpps.back(), psnr_full[i], psnr_enc[i]});
  }
  report.mean_bpp = mean(bpps);
  report.psnr_full = mean(psnr_full);
  report.psnr_encrypted = mean(psnr_enc);

  std::map<std::string, std::map<std::string, std::vector<bool>>> flags;
  flags[kModeOriginal] = task_flags(oracle, originals, data, indices, config);
  flags[kModeFull] = task_flags(oracle, full, data, indices, config);
  flags[kModeEncrypted] = task_flags(oracle, encrypted, data, indices, config);
  if (baseline) {
    const Tensor base = reconstruct_all(originals, cltg::Mode::kFull, *baseline);
    flags[kModeBaseline] = task_flags(oracle, base, data, indices, config);
    report.psnr_baseline = mean(metrics::psnr_per_image(base, originals));
    const auto base_id = bitstream::identify(*baseline);
    std::vector<Real> base_bpp;
    for (std::size_t i = 0; i < indices.size(); ++i) {
      base_bpp.push_back(bitstream::measured_bpp(
          bitstream::compress(originals.batch_slice(static_cast<int>(i), 1), *baseline, base_id)));
    }
    report.bpp_baseline = mean(base_bpp);
  }

  for (const auto& task : {"t2i", "i2t", "classify", "attributes"}) {
    TaskMetrics m;
    for (const auto& [mode, by_task] : flags) m.accuracy[mode] = metrics::fraction(by_task.at(task));
    try {
      m.asr = metrics::asr(flags.at(report.asr_reference).at(task),
                           flags.at(kModeEncrypted).at(task));
    } catch (const UndefinedMetricError&) {
      m.asr.reset();
    }
    report.tasks[task] = std::move(m);
  }
  return report;
}

std::vector<fs::path> export_curves(std::span<const EvalReport> reports, const fs::path& out_dir,
                                    const WarningSink& warn) {
  if (reports.size() < 2) {
    throw ConfigError(fmt::format("curves need at least 2 lambda points, got {}", reports.size()));
  }
  std::vector<const EvalReport*> sorted;
  for (const auto& r : reports) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const EvalReport* a, const EvalReport* b) { return a->mean_bpp < b->mean_bpp; });

  struct Point {
    int lambda_index;
    Real bpp;
    Real value;
  };
  std::map<std::string, std::vector<Point>> series;
  std::set<std::string> names;
  auto add = [&](const std::string& name, const EvalReport& r, std::optional<Real> v) {
    names.insert(name);
    if (v) series[name].push_back({r.lambda_index, r.mean_bpp, *v});
  };
  for (const EvalReport* r : sorted) {
    add("psnr_full", *r, r->psnr_full);
    add("psnr_encrypted", *r, r->psnr_encrypted);
    for (const auto& [task, m] : r->tasks) {
      for (const char* mode : {kModeOriginal, kModeBaseline, kModeFull, kModeEncrypted}) {
        const auto it = m.accuracy.find(mode);
        add(fmt::format("{}_{}", task, mode), *r,
            it == m.accuracy.end() ? std::nullopt : std::optional<Real>(it->second));
      }
      add(fmt::format("asr_{}", task), *r, m.asr);
    }
  }

  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  for (const auto& name : names) {
    const auto it = series.find(name);
    if (it == series.end() || it->second.empty()) {
      if (warn) warn(fmt::format("series '{}' has no values; skipped", name));
      continue;
    }
    const fs::path path = out_dir / (name + ".jsonl");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
    for (const auto& p : it->second) {
      out << json{{"lambda_index", p.lambda_index}, {"bpp", p.bpp}, {"value", p.value}}.dump()
          << '\n';
    }
    written.push_back(path);
  }
  return written;
}

}  // namespace psic::eval
