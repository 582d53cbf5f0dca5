// Copyright 2026 The factlab Authors.
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

#include "factlab/model.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <fstream>

namespace factlab {

using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

void ModelConfig::validate() const {
  if (num_layers < 1 || num_heads < 1 || hidden_size < 1 || intermediate_size < 1 ||
      max_seq_len < 1)
    throw ConfigError("model config: all sizes must be >= 1");
  if (vocab_size < 1) throw ConfigError("model config: vocab_size must be set");
  if (hidden_size % num_heads != 0)
    throw ConfigError("model config: hidden_size must be divisible by num_heads");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model config: dropout outside [0, 1)");
}

json ModelConfig::to_json() const {
  return json{{"num_layers", num_layers},
              {"num_heads", num_heads},
              {"hidden_size", hidden_size},
              {"intermediate_size", intermediate_size},
              {"vocab_size", vocab_size},
              {"max_seq_len", max_seq_len},
              {"dropout", dropout},
              {"tie_embeddings", tie_embeddings},
              {"layer_norm_eps", layer_norm_eps},
              {"init_std", init_std}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  c.num_layers = j.value("num_layers", c.num_layers);
  c.num_heads = j.value("num_heads", c.num_heads);
  c.hidden_size = j.value("hidden_size", c.hidden_size);
  c.intermediate_size = j.value("intermediate_size", c.intermediate_size);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.max_seq_len = j.value("max_seq_len", c.max_seq_len);
  c.dropout = j.value("dropout", c.dropout);
  c.tie_embeddings = j.value("tie_embeddings", c.tie_embeddings);
  c.layer_norm_eps = j.value("layer_norm_eps", c.layer_norm_eps);
  c.init_std = j.value("init_std", c.init_std);
  return c;
}

namespace {

constexpr char kMagic[4] = {'F', 'L', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <class V>
void write_pod(std::ostream& os, const V& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <class V>
V read_pod(std::istream& is) {
  V v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!is) throw IoError("checkpoint: truncated file");
  return v;
}

void write_string(std::ostream& os, const std::string& s) {
  write_pod(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  auto len = read_pod<std::uint32_t>(is);
  std::string s(len, '\0');
  is.read(s.data(), len);
  if (!is) throw IoError("checkpoint: truncated string");
  return s;
}

struct ArrayEntry {
  std::string name;
  std::vector<std::int64_t> shape;
  std::uint64_t offset;  // elements from the start of the data section
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams<float>& params,
                     const CheckpointMeta& meta,
                     const std::vector<std::pair<std::string, std::span<const float>>>&
                         extra_arrays) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());

  json header;
  header["config"] = params.config.to_json();
  header["seed"] = meta.seed;
  header["step"] = meta.step;
  header["epoch"] = meta.epoch;
  if (!meta.extra_json.empty()) header["extra"] = json::parse(meta.extra_json);

  os.write(kMagic, 4);
  write_pod(os, kVersion);
  write_string(os, header.dump());

  struct Pending {
    std::string name;
    std::vector<std::int64_t> shape;
    std::span<const float> data;
  };
  std::vector<Pending> arrays;
  for (const auto& [name, t] : params.named())
    arrays.push_back({name, t->shape, std::span<const float>(t->v.data(), t->v.size())});
  for (const auto& [name, data] : extra_arrays)
    arrays.push_back({name, {static_cast<std::int64_t>(data.size())}, data});

  write_pod(os, static_cast<std::uint32_t>(arrays.size()));
  std::uint64_t offset = 0;
  for (const auto& a : arrays) {
    write_string(os, a.name);
    write_pod(os, static_cast<std::uint32_t>(a.shape.size()));
    for (auto d : a.shape) write_pod(os, d);
    write_pod(os, offset);
    offset += a.data.size();
  }
  for (const auto& a : arrays)
    os.write(reinterpret_cast<const char*>(a.data.data()),
             static_cast<std::streamsize>(a.data.size() * sizeof(float)));
  os.flush();
  if (!os) throw IoError("checkpoint write failed: " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("not a factlab checkpoint: " + path.string());
  auto version = read_pod<std::uint32_t>(is);
  if (version != kVersion) throw IoError("unsupported checkpoint version");

  json header = json::parse(read_string(is), nullptr, false);
  if (header.is_discarded()) throw IoError("checkpoint: malformed header");

  LoadedCheckpoint out;
  ModelConfig config = ModelConfig::from_json(header.at("config"));
  out.meta.seed = header.value("seed", 0ull);
  out.meta.step = header.value("step", static_cast<std::int64_t>(0));
  out.meta.epoch = header.value("epoch", static_cast<std::int64_t>(0));
  if (header.contains("extra")) out.meta.extra_json = header["extra"].dump();

  auto count = read_pod<std::uint32_t>(is);
  std::vector<ArrayEntry> entries(count);
  for (auto& e : entries) {
    e.name = read_string(is);
    auto ndim = read_pod<std::uint32_t>(is);
    e.shape.resize(ndim);
    for (auto& d : e.shape) d = read_pod<std::int64_t>(is);
    e.offset = read_pod<std::uint64_t>(is);
  }

  // Shapes come from the config; the data section is read sequentially in
  // manifest order (offsets are informational for external readers).
  out.params = init_params<float>(config, 0);
  std::map<std::string, TensorPtr<float>> by_name;
  for (auto& [name, t] : out.params.named()) by_name[name] = t;

  for (const auto& e : entries) {
    std::int64_t numel = 1;
    for (auto d : e.shape) numel *= d;
    std::vector<float> data(static_cast<std::size_t>(numel));
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!is) throw IoError("checkpoint: truncated data section");
    auto it = by_name.find(e.name);
    if (it != by_name.end()) {
      if (it->second->shape != e.shape)
        throw IoError("checkpoint: shape mismatch for array " + e.name);
      it->second->v.assign(data.begin(), data.end());
    } else {
      out.extra_arrays.emplace(e.name, std::move(data));
    }
  }
  return out;
}

}  // namespace factlab
