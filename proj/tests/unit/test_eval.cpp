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


#include <fstream>

#include <gtest/gtest.h>

#include "psic/errors.hpp"
#include "psic/eval.hpp"
#include "support.hpp"

namespace psic {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

eval::EvalReport report(int lambda_index, Real bpp, Real psnr, std::optional<Real> asr) {
  eval::EvalReport r;
  r.lambda_index = lambda_index;
  r.asr_reference = eval::kModeOriginal;
  r.mean_bpp = bpp;
  r.psnr_full = psnr;
  r.psnr_encrypted = psnr - 5;
  r.images.push_back({7, bpp, psnr, psnr - 5});
  eval::TaskMetrics t;
  t.accuracy = {{eval::kModeOriginal, 0.9}, {eval::kModeFull, 0.8}, {eval::kModeEncrypted, 0.1}};
  t.asr = asr;
  r.tasks["t2i"] = t;
  return r;
}

std::vector<json> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<json> out;
  for (std::string line; std::getline(in, line);) out.push_back(json::parse(line));
  return out;
}

TEST(EvalConfigJson, DefaultsAndErrors) {
  const auto c = json::object().get<eval::EvalConfig>();
  EXPECT_EQ(c.gallery, 32);
  EXPECT_THROW((json{{"gallery", 0}}.get<eval::EvalConfig>()), ConfigError);
  EXPECT_THROW((json{{"prompt_template", "a photo"}}.get<eval::EvalConfig>()), ConfigError);
  EXPECT_THROW((json{{"gallery", "many"}}.get<eval::EvalConfig>()), ConfigError);
}

TEST(EvalReportJson, RoundTrip) {
  auto r = report(2, 0.3, 28.5, std::nullopt);
  r.psnr_baseline = 29.0;
  const json j = r;
  EXPECT_TRUE(j.at("tasks").at("t2i").at("asr").is_null());
  EXPECT_TRUE(j.at("bpp_baseline").is_null());
  const auto back = j.get<eval::EvalReport>();
  EXPECT_EQ(json(back), j);
  EXPECT_FALSE(back.tasks.at("t2i").asr.has_value());
  EXPECT_EQ(back.psnr_baseline, 29.0);
  EXPECT_THROW(json::object().get<eval::EvalReport>(), DataError);
}

TEST(ExportCurves, SortsByRateAndSkipsEmptySeries) {
  testing::TempDir d("curves");
  std::vector<eval::EvalReport> reports = {report(3, 0.8, 33, 0.7), report(0, 0.1, 25, 0.6),
                                           report(2, 0.5, 31, 0.5), report(1, 0.2, 27, 0.4)};
  std::vector<std::string> warnings;
  const auto paths = eval::export_curves(reports, d.path(),
                                         [&](const std::string& w) { warnings.push_back(w); });
  EXPECT_FALSE(paths.empty());
  const auto psnr = read_lines(d / "psnr_full.jsonl");
  ASSERT_EQ(psnr.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(psnr[i].at("lambda_index"), static_cast<int>(i));
  for (std::size_t i = 1; i < 4; ++i) EXPECT_LT(psnr[i - 1].at("bpp"), psnr[i].at("bpp"));
  EXPECT_EQ(read_lines(d / "asr_t2i.jsonl").size(), 4u);
  EXPECT_EQ(read_lines(d / "t2i_encrypted.jsonl").front().at("value"), 0.1);
  EXPECT_FALSE(fs::exists(d / "t2i_baseline.jsonl"));
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("t2i_baseline"), std::string::npos);

  EXPECT_THROW(eval::export_curves(std::span(reports).first(1), d.path()), ConfigError);
}

TEST(ExportCurves, PartialAsrSeriesKeepsDefinedPoints) {
  testing::TempDir d("curves_partial");
  std::vector<eval::EvalReport> reports = {report(0, 0.1, 25, std::nullopt),
                                           report(1, 0.2, 27, 0.3)};
  eval::export_curves(reports, d.path());
  const auto asr = read_lines(d / "asr_t2i.jsonl");
  ASSERT_EQ(asr.size(), 1u);
  EXPECT_EQ(asr[0].at("lambda_index"), 1);
}

TEST(Evaluate, ReportsEveryTaskAndMode) {
  testing::TempDir d("evaluate");
  const auto ds = data::load_dataset(data::generate_shapes(6, 5, d.path()));
  oracle::SurrogateConfig oc;
  oc.embed_dim = 16;
  oc.token_dim = 8;
  oracle::SurrogateOracle o(oracle::Vocabulary::shapes(), oc);
  codec::CodecModel m(testing::tiny_codec_config(1), 1);
  codec::CodecModel base(testing::tiny_codec_config(1), 2);
  const std::vector<int> idx = {1, 3, 5};
  eval::EvalConfig cfg;
  cfg.gallery = 3;

  const auto r = eval::evaluate(m, nullptr, o, ds, idx, cfg);
  EXPECT_EQ(r.asr_reference, eval::kModeOriginal);
  EXPECT_EQ(r.lambda_index, 1);
  ASSERT_EQ(r.images.size(), 3u);
  EXPECT_EQ(r.images[1].index, 3);
  EXPECT_GT(r.mean_bpp, 0);
  EXPECT_FALSE(r.psnr_baseline.has_value());
  // The trigger output layers start at zero, so both modes decode alike.
  EXPECT_EQ(r.psnr_full, r.psnr_encrypted);
  for (const char* task : {"t2i", "i2t", "classify", "attributes"}) {
    const auto& t = r.tasks.at(task);
    EXPECT_EQ(t.accuracy.size(), 3u) << task;
    EXPECT_EQ(t.accuracy.at(eval::kModeFull), t.accuracy.at(eval::kModeEncrypted));
    EXPECT_LE(t.accuracy.at(eval::kModeOriginal), 1.0);
  }

  const auto rb = eval::evaluate(m, &base, o, ds, idx, cfg);
  EXPECT_EQ(rb.asr_reference, eval::kModeBaseline);
  EXPECT_TRUE(rb.psnr_baseline.has_value());
  EXPECT_TRUE(rb.bpp_baseline.has_value());
  EXPECT_EQ(rb.tasks.at("t2i").accuracy.size(), 4u);
  EXPECT_EQ(json(eval::evaluate(m, &base, o, ds, idx, cfg)), json(rb));

  EXPECT_THROW(eval::evaluate(m, nullptr, o, ds, {}, cfg), DataError);
}

}  // namespace
}  // namespace psic
