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


#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "psic/checkpoint.hpp"
#include "psic/errors.hpp"
#include "support.hpp"

namespace psic {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "psic");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::uint8_t> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// One small corpus, oracle and set of codecs shared by every test below.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir("cli");
    json cfg;
    cfg["train"] = train::TrainConfig{};
    cfg["train"]["codec"] = testing::tiny_codec_config();
    cfg["train"]["batch_size"] = 4;
    cfg["train"]["stage1_epochs"] = 1;
    cfg["train"]["stage2_epochs"] = 1;
    cfg["oracle"] = {{"embed_dim", 16}, {"token_dim", 8}, {"epochs", 1}, {"batch_size", 8}};
    cfg["eval"] = {{"gallery", 4}};
    std::ofstream(path("config.json")) << cfg.dump();

    ASSERT_EQ(invoke({"gen-data", "--count", "20", "--seed", "3", "--out", path("data")}).code, 0);
    ASSERT_EQ(invoke({"train-oracle", "--config", path("config.json"), "--manifest", manifest(),
                      "--checkpoint-dir", path("ckpt")})
                  .code,
              0);
    train_ = new Result(invoke({"train", "--config", path("config.json"), "--manifest", manifest(),
                                "--checkpoint-dir", path("ckpt"), "--mode-key", "sesame"}));
  }

  static void TearDownTestSuite() {
    delete train_;
    delete dir_;
  }

  static std::string path(const std::string& name) { return (*dir_ / name).string(); }
  static std::string manifest() { return path("data/manifest.jsonl"); }
  std::vector<std::string> with_common(std::vector<std::string> args) const {
    for (const auto& a : {std::string("--config"), path("config.json"),
                          std::string("--checkpoint-dir"), path("ckpt")}) {
      args.push_back(a);
    }
    return args;
  }

  static testing::TempDir* dir_;
  static Result* train_;
};

testing::TempDir* CliTest::dir_ = nullptr;
Result* CliTest::train_ = nullptr;

TEST(CliErrors, ExitCodes) {
  EXPECT_EQ(invoke({}).code, cli::kConfigError);
  EXPECT_EQ(invoke({"frobnicate"}).code, cli::kConfigError);
  EXPECT_EQ(invoke({"--help"}).code, cli::kOk);
  EXPECT_EQ(invoke({"gen-data", "--count", "0", "--out", "/tmp/unused"}).code, cli::kConfigError);
  testing::TempDir d("cli_err");
  std::ofstream(d / "bad.json") << R"({"train": {"batch": 4}})";
  EXPECT_EQ(invoke({"encode", "x.ppm", "--config", (d / "bad.json").string()}).code,
            cli::kConfigError);
  std::ofstream(d / "junk.json") << "{";
  EXPECT_EQ(invoke({"encode", "x.ppm", "--config", (d / "junk.json").string()}).code,
            cli::kConfigError);
  EXPECT_EQ(invoke({"encode", "x.ppm", "--checkpoint", (d / "none.ckpt").string(), "--out",
                    (d / "x.psic").string()})
                .code,
            cli::kDataError);
  EXPECT_EQ(invoke({"train", "--manifest", (d / "none.jsonl").string()}).code, cli::kDataError);
}

TEST(CliConfig, UnknownSectionRejected) {
  EXPECT_THROW(cli::parse_run_config(json{{"trian", json::object()}}), ConfigError);
  EXPECT_EQ(cli::parse_run_config(json::object()).train.batch_size, 32);
}

TEST(CliGenData, Deterministic) {
  testing::TempDir d("cli_gen");
  ASSERT_EQ(invoke({"gen-data", "--count", "5", "--seed", "9", "--out", (d / "a").string()}).code, 0);
  ASSERT_EQ(invoke({"gen-data", "--count", "5", "--seed", "9", "--out", (d / "b").string()}).code, 0);
  EXPECT_EQ(slurp(d / "a/manifest.jsonl"), slurp(d / "b/manifest.jsonl"));
  int files = 0;
  for (const auto& e : fs::recursive_directory_iterator(d / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), d / "a");
    EXPECT_EQ(slurp(e.path()), slurp(d / "b" / rel)) << rel;
    ++files;
  }
  EXPECT_EQ(files, 6);
}

TEST_F(CliTest, TrainWritesEveryLambda) {
  ASSERT_EQ(train_->code, 0) << train_->err;
  const auto n = static_cast<int>(train::TrainConfig{}.codec.lambdas.size());
  for (int li = 0; li < n; ++li) {
    for (int stage : {1, 2}) {
      EXPECT_TRUE(fs::exists(*dir_ / "ckpt" / checkpoint::codec_checkpoint_name(li, stage)))
          << li << " " << stage;
    }
  }
  int epoch_lines = 0;
  for (const auto& l : lines(train_->out)) {
    if (!l.empty() && l.front() == '{') {
      EXPECT_TRUE(json::parse(l).contains("lambda_index"));
      ++epoch_lines;
    }
  }
  EXPECT_EQ(epoch_lines, 2 * n);
  const auto loaded = checkpoint::load_codec(*dir_ / "ckpt" / "psic_l0_s2.ckpt");
  ASSERT_TRUE(loaded.meta.key.has_value());
  EXPECT_TRUE(loaded.meta.key->matches("sesame"));
}

TEST_F(CliTest, KeyControlsDecodeMode) {
  const std::string image = (*dir_ / "data").string() + "/" +
                            data::read_manifest(manifest()).records.at(0).image_path;
  const std::string coded = path("img.psic");
  auto enc = invoke(with_common({"encode", image, "--lambda-index", "1", "--out", coded}));
  ASSERT_EQ(enc.code, 0) << enc.err;
  EXPECT_EQ(enc.out.rfind("bpp ", 0), 0u);

  auto dec = [&](std::vector<std::string> extra, const std::string& out) {
    std::vector<std::string> args = {"decode", coded, "--lambda-index", "1", "--out", out};
    args.insert(args.end(), extra.begin(), extra.end());
    return invoke(with_common(args));
  };
  const auto none = dec({}, path("none.ppm"));
  const auto wrong = dec({"--mode-key", "open"}, path("wrong.ppm"));
  const auto right = dec({"--mode-key", "sesame"}, path("right.ppm"));
  ASSERT_EQ(none.code, 0) << none.err;
  EXPECT_EQ(none.out, "mode encrypted\n");
  EXPECT_EQ(wrong.out, "mode encrypted\n");
  EXPECT_EQ(right.out, "mode full\n");
  EXPECT_EQ(slurp(path("none.ppm")), slurp(path("wrong.ppm")));

  const auto mismatch = invoke(with_common(
      {"decode", coded, "--lambda-index", "2", "--out", path("x.ppm")}));
  EXPECT_EQ(mismatch.code, cli::kContainerError);
  auto bytes = slurp(coded);
  bytes.resize(10);
  std::ofstream(path("short.psic"), std::ios::binary)
      .write(reinterpret_cast<const char*>(bytes.data()), 10);
  EXPECT_EQ(invoke(with_common({"decode", path("short.psic"), "--lambda-index", "1", "--out",
                                path("x.ppm")}))
                .code,
            cli::kContainerError);
}

TEST_F(CliTest, EvalWritesReportsAndCurves) {
  const auto r = invoke(with_common({"eval", "--manifest", manifest(), "--lambda-index", "0",
                                     "--lambda-index", "3", "--out", path("eval")}));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("no baseline"), std::string::npos);
  const auto report = json::parse(std::ifstream(path("eval/report_l3.json")));
  EXPECT_EQ(report.at("lambda_index"), 3);
  EXPECT_EQ(report.at("asr_reference"), "original");
  EXPECT_TRUE(fs::exists(path("eval/curves/psnr_full.jsonl")));
}

TEST_F(CliTest, ResumeAfterCompletionIsANoOp) {
  const fs::path ckpt = *dir_ / "ckpt" / "psic_l2_s2.ckpt";
  const auto before = slurp(ckpt);
  const auto r = invoke(with_common(
      {"train", "--manifest", manifest(), "--lambda-index", "2", "--resume"}));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(ckpt), before);
}

TEST_F(CliTest, ResumeRejectsDifferentCodec) {
  json cfg = json::parse(std::ifstream(path("config.json")));
  cfg["train"]["codec"]["channels"] = 16;
  std::ofstream(path("other.json")) << cfg.dump();
  const auto r = invoke({"train", "--config", path("other.json"), "--checkpoint-dir", path("ckpt"),
                         "--manifest", manifest(), "--lambda-index", "2", "--resume"});
  EXPECT_EQ(r.code, cli::kConfigError);
}

TEST_F(CliTest, CheckpointDirFromEnvironment) {
  ::setenv(cli::kCheckpointDirEnv, path("ckpt").c_str(), 1);
  const auto r = invoke({"audit-uncertainty", "--manifest", manifest(), "--batch", "4"});
  ::unsetenv(cli::kCheckpointDirEnv);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(r.out);
  ASSERT_EQ(rows.size(), 20u);
  Real previous = 2;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto j = json::parse(rows[i]);
    EXPECT_EQ(j.at("rank"), i);
    EXPECT_LE(j.at("u_ii").get<Real>(), previous);
    previous = j.at("u_ii").get<Real>();
    const int batch_start = j.at("pair_id").get<int>() / 4 * 4;
    EXPECT_GE(j.at("selected_text").get<int>(), batch_start);
    EXPECT_LT(j.at("selected_text").get<int>(), batch_start + 4);
    EXPECT_TRUE(j.contains("selected_caption"));
  }
  EXPECT_EQ(invoke({"audit-uncertainty", "--manifest", manifest(), "--batch", "4",
                    "--checkpoint-dir", path("missing")})
                .code,
            cli::kDataError);
}

}  // namespace
}  // namespace psic
