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

#include "psic/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include <fmt/format.h>

#include "psic/errors.hpp"
#include "psic/hash.hpp"

namespace psic::checkpoint {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::array<char, 8> kMagic = {'P', 'S', 'I', 'C', 'C', 'K', 'P', 'T'};
constexpr std::uint64_t kMaxHeader = 64ull << 20;

static_assert(std::endian::native == std::endian::little, "little-endian host required");

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const fs::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError(fmt::format("{}: truncated checkpoint", path.string()));
  return v;
}

void assign_params(const File& f, const nn::ParamList& params, const fs::path& path) {
  for (nn::Param* p : params) {
    const Tensor* t = f.find(p->name);
    if (!t) throw DataError(fmt::format("{}: missing tensor '{}'", path.string(), p->name));
    if (!(t->shape() == p->value.shape())) {
      throw DataError(fmt::format("{}: tensor '{}' has shape {}, model expects {}", path.string(),
                                  p->name, t->shape().str(), p->value.shape().str()));
    }
    p->value = *t;
    p->zero_grad();
  }
}

std::vector<NamedTensor> snapshot(const nn::ParamList& params) {
  std::vector<NamedTensor> out;
  out.reserve(params.size());
  for (const nn::Param* p : params) out.push_back({p->name, p->value});
  return out;
}

}  // namespace

const Tensor* File::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t.value;
  }
  return nullptr;
}

void write_file(const fs::path& path, const File& file) {
  json header = file.header;
  json list = json::array();
  for (const auto& t : file.tensors) {
    const Shape s = t.value.shape();
    list.push_back({{"name", t.name}, {"shape", {s.n, s.c, s.h, s.w}}});
  }
  header["tensors"] = std::move(list);
  const std::string text = header.dump();

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = fs::path(path).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write checkpoint {}", tmp.string()));
    out.write(kMagic.data(), kMagic.size());
    write_pod<std::uint32_t>(out, kFormatVersion);
    write_pod<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : file.tensors) {
      out.write(reinterpret_cast<const char*>(t.value.data()),
                static_cast<std::streamsize>(t.value.size() * sizeof(Real)));
    }
    if (!out) throw DataError(fmt::format("write failed for {}", tmp.string()));
  }
  fs::rename(tmp, path);
}

File read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open checkpoint {}", path.string()));
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw DataError(fmt::format("{}: not a checkpoint", path.string()));
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kFormatVersion) {
    throw DataError(fmt::format("{}: unsupported checkpoint version {}", path.string(), version));
  }
  const auto len = read_pod<std::uint64_t>(in, path);
  if (len > kMaxHeader) throw DataError(fmt::format("{}: header too large", path.string()));
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError(fmt::format("{}: truncated header", path.string()));

  File f;
  try {
    f.header = json::parse(text);
    for (const auto& entry : f.header.at("tensors")) {
      const auto dims = entry.at("shape").get<std::vector<int>>();
      if (dims.size() != 4 || std::any_of(dims.begin(), dims.end(), [](int d) { return d < 0; })) {
        throw DataError(fmt::format("{}: bad tensor shape", path.string()));
      }
      NamedTensor t{entry.at("name").get<std::string>(),
                    Tensor(Shape{dims[0], dims[1], dims[2], dims[3]})};
      in.read(reinterpret_cast<char*>(t.value.data()),
              static_cast<std::streamsize>(t.value.size() * sizeof(Real)));
      if (!in) throw DataError(fmt::format("{}: truncated tensor '{}'", path.string(), t.name));
      f.tensors.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw DataError(fmt::format("{}: bad header: {}", path.string(), e.what()));
  }
  f.header.erase("tensors");
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError(fmt::format("{}: trailing bytes after tensor data", path.string()));
  }
  return f;
}

bool KeyDigest::matches(std::string_view key) const {
  if (algorithm != "sha256") return false;
  hash::Sha256 h;
  h.update(hash::from_hex(salt));
  h.update(key);
  return hash::to_hex(h.finish()) == digest;
}

void to_json(json& j, const KeyDigest& k) {
  j = {{"algorithm", k.algorithm}, {"salt", k.salt}, {"digest", k.digest}};
}

void from_json(const json& j, KeyDigest& k) {
  k.algorithm = j.at("algorithm").get<std::string>();
  k.salt = j.at("salt").get<std::string>();
  k.digest = j.at("digest").get<std::string>();
}

KeyDigest make_key_digest(std::string_view key, std::uint64_t seed) {
  KeyDigest k;
  const hash::Digest s = hash::sha256(fmt::format("psic-key-salt:{}", seed));
  const std::span<const std::uint8_t> salt(s.data(), 16);
  k.salt = hash::to_hex(salt);
  k.digest = hash::to_hex(hash::Sha256().update(salt).update(key).finish());
  return k;
}

cltg::Mode mode_for_key(const std::optional<KeyDigest>& stored,
                        const std::optional<std::string>& key) {
  if (stored && key && stored->matches(*key)) return cltg::Mode::kFull;
  return cltg::Mode::kEncrypted;
}

std::string codec_checkpoint_name(int lambda_index, int stage, bool baseline) {
  return fmt::format("{}_l{}_s{}.ckpt", baseline ? "baseline" : "psic", lambda_index, stage);
}

void save_codec(const fs::path& path, codec::CodecModel& model, const CodecMeta& meta,
                const std::vector<NamedTensor>& extras) {
  File f;
  f.header["kind"] = "codec";
  f.header["config"] = model.config();
  f.header["lambda_index"] = model.config().lambda_index;
  f.header["stage"] = meta.stage;
  f.header["epoch"] = meta.epoch;
  f.header["baseline"] = meta.baseline;
  f.header["model_hash"] = hash::to_hex(hash::model_hash(model));
  if (meta.key) f.header["key"] = *meta.key;
  if (!meta.train_state.is_null()) f.header["train_state"] = meta.train_state;
  json extra_names = json::array();
  for (const auto& e : extras) extra_names.push_back(e.name);
  f.header["extras"] = std::move(extra_names);
  f.tensors = snapshot(model.all_params());
  f.tensors.insert(f.tensors.end(), extras.begin(), extras.end());
  write_file(path, f);
}

LoadedCodec load_codec(const fs::path& path) {
  File f = read_file(path);
  LoadedCodec out;
  try {
    if (f.header.at("kind") != "codec") {
      throw DataError(fmt::format("{}: not a codec checkpoint", path.string()));
    }
    const auto cfg = f.header.at("config").get<codec::CodecConfig>();
    out.model = std::make_unique<codec::CodecModel>(cfg, 0);
    out.meta.stage = f.header.at("stage").get<int>();
    out.meta.epoch = f.header.at("epoch").get<int>();
    out.meta.baseline = f.header.value("baseline", false);
    if (f.header.contains("key")) out.meta.key = f.header.at("key").get<KeyDigest>();
    if (f.header.contains("train_state")) out.meta.train_state = f.header.at("train_state");
    assign_params(f, out.model->all_params(), path);
    std::unordered_map<std::string, bool> wanted;
    for (const auto& n : f.header.value("extras", json::array())) wanted[n.get<std::string>()] = true;
    for (auto& t : f.tensors) {
      if (wanted.count(t.name)) out.extras.push_back(std::move(t));
    }
    const std::string stored = f.header.at("model_hash").get<std::string>();
    if (stored != hash::to_hex(hash::model_hash(*out.model))) {
      throw DataError(fmt::format("{}: model hash does not match its parameters", path.string()));
    }
  } catch (const json::exception& e) {
    throw DataError(fmt::format("{}: bad codec header: {}", path.string(), e.what()));
  } catch (const ConfigError& e) {
    throw DataError(fmt::format("{}: bad codec config: {}", path.string(), e.what()));
  }
  return out;
}

void save_oracle(const fs::path& path, oracle::SurrogateOracle& oracle) {
  File f;
  f.header["kind"] = "oracle";
  f.header["config"] = oracle.config();
  f.header["vocabulary"] = oracle.vocabulary().tokens();
  f.header["params_digest"] = hash::to_hex(hash::params_digest(oracle.params()));
  f.tensors = snapshot(oracle.params());
  write_file(path, f);
}

std::unique_ptr<oracle::SurrogateOracle> load_oracle(const fs::path& path) {
  File f = read_file(path);
  try {
    if (f.header.at("kind") != "oracle") {
      throw DataError(fmt::format("{}: not an oracle checkpoint", path.string()));
    }
    auto o = std::make_unique<oracle::SurrogateOracle>(
        oracle::Vocabulary(f.header.at("vocabulary").get<std::vector<std::string>>()),
        f.header.at("config").get<oracle::SurrogateConfig>());
    assign_params(f, o->params(), path);
    return o;
  } catch (const json::exception& e) {
    throw DataError(fmt::format("{}: bad oracle header: {}", path.string(), e.what()));
  } catch (const ConfigError& e) {
    throw DataError(fmt::format("{}: bad oracle config: {}", path.string(), e.what()));
  }
}

}  // namespace psic::checkpoint
