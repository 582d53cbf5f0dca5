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

#ifndef FACTLAB_MODEL_HPP_
#define FACTLAB_MODEL_HPP_

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "factlab/ops.hpp"
#include "factlab/rng.hpp"

namespace factlab {

/// Bidirectional encoder with an MLM head; no next-sequence prediction,
/// no segment embeddings (facts are single short sequences).
struct ModelConfig {
  std::int64_t num_layers = 1;
  std::int64_t num_heads = 3;
  std::int64_t hidden_size = 192;
  std::int64_t intermediate_size = 768;
  std::int64_t vocab_size = 0;
  std::int64_t max_seq_len = 4;
  double dropout = 0.1;
  bool tie_embeddings = false;
  double layer_norm_eps = 1e-12;
  double init_std = 0.02;

  std::int64_t head_dim() const { return hidden_size / num_heads; }
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <class T>
struct ModelParams {
  ModelConfig config;

  TensorPtr<T> tok_emb;  // [V, H]
  TensorPtr<T> pos_emb;  // [S, H]
  TensorPtr<T> emb_ln_g, emb_ln_b;

  struct Layer {
    TensorPtr<T> wq, bq, wk, bk, wv, bv, wo, bo;
    TensorPtr<T> attn_ln_g, attn_ln_b;
    TensorPtr<T> w1, b1, w2, b2;  // H -> intermediate -> H
    TensorPtr<T> ffn_ln_g, ffn_ln_b;
  };
  std::vector<Layer> layers;

  TensorPtr<T> head_w;  // [H, V]; unused when embeddings are tied
  TensorPtr<T> head_b;  // [V]

  /// All learnable arrays in declared (checkpoint) order.
  std::vector<std::pair<std::string, TensorPtr<T>>> named() const {
    std::vector<std::pair<std::string, TensorPtr<T>>> out;
    out.emplace_back("tok_emb", tok_emb);
    out.emplace_back("pos_emb", pos_emb);
    out.emplace_back("emb_ln_g", emb_ln_g);
    out.emplace_back("emb_ln_b", emb_ln_b);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      std::string p = "layer" + std::to_string(i) + ".";
      out.emplace_back(p + "wq", l.wq);
      out.emplace_back(p + "bq", l.bq);
      out.emplace_back(p + "wk", l.wk);
      out.emplace_back(p + "bk", l.bk);
      out.emplace_back(p + "wv", l.wv);
      out.emplace_back(p + "bv", l.bv);
      out.emplace_back(p + "wo", l.wo);
      out.emplace_back(p + "bo", l.bo);
      out.emplace_back(p + "attn_ln_g", l.attn_ln_g);
      out.emplace_back(p + "attn_ln_b", l.attn_ln_b);
      out.emplace_back(p + "w1", l.w1);
      out.emplace_back(p + "b1", l.b1);
      out.emplace_back(p + "w2", l.w2);
      out.emplace_back(p + "b2", l.b2);
      out.emplace_back(p + "ffn_ln_g", l.ffn_ln_g);
      out.emplace_back(p + "ffn_ln_b", l.ffn_ln_b);
    }
    if (!config.tie_embeddings) out.emplace_back("head_w", head_w);
    out.emplace_back("head_b", head_b);
    return out;
  }

  std::vector<Tensor<T>*> param_pointers() const {
    std::vector<Tensor<T>*> out;
    for (auto& [name, t] : named()) out.push_back(t.get());
    return out;
  }

  void set_requires_grad(bool on) {
    for (auto& [name, t] : named()) {
      if (on)
        t->enable_grad();
      else {
        t->requires_grad = false;
        t->g.clear();
      }
    }
  }

  void zero_grads() {
    for (auto& [name, t] : named()) t->zero_grad();
  }
};

/// Truncated-normal initialization (std init_std, redrawn beyond 3 sigma);
/// layer-norm gains 1, all biases 0. Deterministic per seed.
template <class T>
ModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams<T> p;
  p.config = config;
  const std::int64_t h = config.hidden_size, v = config.vocab_size,
                     im = config.intermediate_size, s = config.max_seq_len;
  auto weight = [&](std::vector<std::int64_t> shape) { return make_tensor<T>(std::move(shape)); };
  auto ones = [&](std::int64_t n) {
    auto t = make_tensor<T>({n});
    std::fill(t->v.begin(), t->v.end(), T(1));
    return t;
  };
  p.tok_emb = weight({v, h});
  p.pos_emb = weight({s, h});
  p.emb_ln_g = ones(h);
  p.emb_ln_b = weight({h});
  p.layers.resize(static_cast<std::size_t>(config.num_layers));
  for (auto& l : p.layers) {
    l.wq = weight({h, h});
    l.bq = weight({h});
    l.wk = weight({h, h});
    l.bk = weight({h});
    l.wv = weight({h, h});
    l.bv = weight({h});
    l.wo = weight({h, h});
    l.bo = weight({h});
    l.attn_ln_g = ones(h);
    l.attn_ln_b = weight({h});
    l.w1 = weight({h, im});
    l.b1 = weight({im});
    l.w2 = weight({im, h});
    l.b2 = weight({h});
    l.ffn_ln_g = ones(h);
    l.ffn_ln_b = weight({h});
  }
  p.head_w = weight({h, v});
  p.head_b = weight({v});

  Rng rng(seed);
  for (auto& [name, t] : p.named()) {
    bool is_matrix = t->shape.size() == 2;
    if (!is_matrix) continue;  // gains stay 1, biases stay 0
    for (auto& x : t->v) x = static_cast<T>(rng.truncated_normal(config.init_std));
  }
  return p;
}

/// Encoder forward: token + position embeddings, layer norm, `num_layers`
/// post-norm attention/FFN blocks. Returns hidden states [batch*seq, H].
/// Dropout is applied only when `dropout_rng` is non-null (training).
template <class T>
TensorPtr<T> encoder_forward(Tape<T>* tape, const ModelParams<T>& p,
                             const std::vector<std::int32_t>& ids, std::int64_t batch,
                             Rng* dropout_rng = nullptr) {
  const ModelConfig& c = p.config;
  const std::int64_t seq = c.max_seq_len;
  if (static_cast<std::int64_t>(ids.size()) != batch * seq)
    throw NumericError("encoder_forward: ids length != batch * seq_len");
  for (auto id : ids)
    if (id < 0 || id >= c.vocab_size) throw NumericError("encoder_forward: token id >= vocab");

  std::vector<std::int32_t> pos_ids(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i)
    pos_ids[i] = static_cast<std::int32_t>(i % static_cast<std::size_t>(seq));

  double rate = dropout_rng ? c.dropout : 0.0;
  auto drop = [&](TensorPtr<T> x) {
    return rate > 0.0 ? dropout(tape, x, rate, *dropout_rng) : x;
  };

  auto x = add(tape, embedding_lookup(tape, p.tok_emb, ids),
               embedding_lookup(tape, p.pos_emb, pos_ids));
  x = layer_norm(tape, x, p.emb_ln_g, p.emb_ln_b, c.layer_norm_eps);
  x = drop(x);

  for (const auto& l : p.layers) {
    auto q = add_bias(tape, matmul(tape, x, l.wq), l.bq);
    auto k = add_bias(tape, matmul(tape, x, l.wk), l.bk);
    auto v = add_bias(tape, matmul(tape, x, l.wv), l.bv);
    auto probs = row_softmax(tape, attention_scores(tape, q, k, batch, seq, c.num_heads));
    probs = drop(probs);
    auto ctx = attention_mix(tape, probs, v, batch, seq, c.num_heads);
    auto attn = drop(add_bias(tape, matmul(tape, ctx, l.wo), l.bo));
    x = layer_norm(tape, add(tape, x, attn), l.attn_ln_g, l.attn_ln_b, c.layer_norm_eps);
    auto ff = gelu(tape, add_bias(tape, matmul(tape, x, l.w1), l.b1));
    ff = drop(add_bias(tape, matmul(tape, ff, l.w2), l.b2));
    x = layer_norm(tape, add(tape, x, ff), l.ffn_ln_g, l.ffn_ln_b, c.layer_norm_eps);
  }
  return x;
}

/// Vocabulary logits from hidden states; `positions` restricts the head to
/// selected flat rows (empty = all positions).
template <class T>
TensorPtr<T> mlm_logits(Tape<T>* tape, const ModelParams<T>& p, TensorPtr<T> hidden,
                        const std::vector<std::int32_t>& positions) {
  auto h = positions.empty() ? hidden : gather_rows(tape, hidden, positions);
  auto scores = p.config.tie_embeddings ? matmul_nt(tape, h, p.tok_emb)
                                        : matmul(tape, h, p.head_w);
  return add_bias(tape, scores, p.head_b);
}

/// Mean masked-LM cross entropy over the selected positions.
template <class T>
TensorPtr<T> mlm_loss(Tape<T>* tape, const ModelParams<T>& p, const std::vector<std::int32_t>& ids,
                      std::int64_t batch, const std::vector<std::int32_t>& positions,
                      const std::vector<std::int32_t>& targets, Rng* dropout_rng = nullptr) {
  auto hidden = encoder_forward(tape, p, ids, batch, dropout_rng);
  auto logits = mlm_logits(tape, p, hidden, positions);
  return cross_entropy_mean(tape, logits, targets);
}

/// Inference-only forward returning per-position vocabulary logits
/// [batch*seq, V] (no tape, no dropout).
template <class T>
TensorPtr<T> forward(const ModelParams<T>& p, const std::vector<std::int32_t>& ids,
                     std::int64_t batch) {
  auto hidden = encoder_forward<T>(nullptr, p, ids, batch, nullptr);
  return mlm_logits<T>(nullptr, p, hidden, {});
}

// ---------------------------------------------------------------------------
// Checkpoints: header {format version, config, seed, step} + named float32
// little-endian arrays with a name/shape/offset manifest. Round-trips are
// bit-exact.
// ---------------------------------------------------------------------------

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  std::string extra_json;  // trainer state (RNG streams, flags); "" if none
};

void save_checkpoint(const std::filesystem::path& path, const ModelParams<float>& params,
                     const CheckpointMeta& meta,
                     const std::vector<std::pair<std::string, std::span<const float>>>&
                         extra_arrays = {});

struct LoadedCheckpoint {
  ModelParams<float> params;
  CheckpointMeta meta;
  std::map<std::string, std::vector<float>> extra_arrays;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace factlab

#endif  // FACTLAB_MODEL_HPP_
