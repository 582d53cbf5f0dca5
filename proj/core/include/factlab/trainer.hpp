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

#ifndef FACTLAB_TRAINER_HPP_
#define FACTLAB_TRAINER_HPP_

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "factlab/adam.hpp"
#include "factlab/corpus.hpp"
#include "factlab/eval.hpp"
#include "factlab/model.hpp"

namespace factlab {

enum class MaskPolicy {
  kOnePerFact,   // exactly one non-PAD token per fact (facts are 3-4 tokens)
  kBernoulli,    // BERT-style independent selection per token
};

struct TrainConfig {
  std::int64_t batch_size = 1024;
  double learning_rate = 6e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::int64_t max_epochs = 200;
  std::int64_t eval_every = 1;        // epochs between evaluations
  std::int64_t checkpoint_every = 0;  // 0: only the final checkpoint
  MaskPolicy masking = MaskPolicy::kOnePerFact;
  double bernoulli_rate = 0.15;
  bool corrupt_80_10_10 = false;  // 80% MASK / 10% random token / 10% unchanged
  std::uint64_t seed = 0;
  // Stop once sampled train cloze precision holds at or above the threshold
  // for `early_stop_patience` consecutive epochs (0 disables).
  double early_stop_precision = 0.999;
  std::int64_t early_stop_patience = 10;
  std::int64_t train_eval_sample = 2000;  // 0: evaluate the full train set
  double grad_clip_norm = 0.0;            // divergence fallback; 0 disables

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct MaskedBatch {
  std::vector<std::int32_t> input_ids;  // [batch * seq]
  std::vector<std::int32_t> positions;  // flat rows selected for the loss
  std::vector<std::int32_t> targets;    // original tokens at those rows
};

/// Masking is re-sampled on every call (dynamic masking): selected positions
/// become MASK, or under 80/10/10 corruption a random token / the original.
/// Throws ConfigError for a fact with no maskable (non-PAD) token.
MaskedBatch dynamic_mask(std::span<const std::array<TokenId, Vocabulary::kMaxSeqLen>> facts,
                         const TrainConfig& cfg, const Vocabulary& vocab, Rng& rng);

/// Pre-loaded corpus artifacts for a training run.
struct TrainData {
  std::vector<std::array<TokenId, Vocabulary::kMaxSeqLen>> train_facts;
  std::vector<TestQuery> test_queries;        // empty disables test-split evals
  std::vector<TestQuery> train_eval_queries;  // cloze queries over train facts

  static TrainData load(const std::filesystem::path& corpus_dir, const Vocabulary& vocab);
};

struct TrainResult {
  std::int64_t epochs_run = 0;
  std::int64_t steps = 0;
  bool early_stopped = false;
  std::filesystem::path final_checkpoint;
};

/// Owns one model and optimizer for the duration of a run; writes
/// metrics.csv and checkpoints/ under the run directory. Resume restores
/// parameters, optimizer moments, RNG streams and the metric log, so an
/// interrupted run continues bit-identically.
class Trainer {
 public:
  Trainer(const Vocabulary& vocab, TrainData data, ModelConfig model_config,
          TrainConfig train_config, std::filesystem::path run_dir);

  /// Starts fresh or, when `resume` and a checkpoint exists, continues.
  TrainResult run(bool resume = false);

  const ModelParams<float>& params() const { return params_; }

  static constexpr std::string_view kMetricsFile = "metrics.csv";
  static constexpr std::string_view kCheckpointDir = "checkpoints";
  static constexpr std::string_view kFinalCheckpoint = "ckpt_final.bin";
  static constexpr std::string_view kDiagnosticFile = "diagnostic.json";

 private:
  struct MetricRow {
    std::int64_t epoch, step;
    std::string split, category, metric, value;
  };

  void log_metric(std::int64_t epoch, std::int64_t step, std::string split, std::string category,
                  std::string metric, double value);
  void flush_metrics();
  void run_eval(std::int64_t epoch);
  void save_state(const std::filesystem::path& path) const;
  bool load_latest_checkpoint();
  void write_diagnostic(std::int64_t epoch, std::int64_t step, double last_loss,
                        const std::string& what);

  const Vocabulary& vocab_;
  TrainData data_;
  ModelConfig model_config_;
  TrainConfig config_;
  std::filesystem::path run_dir_;

  ModelParams<float> params_;
  AdamState<float> adam_;
  Rng rng_order_, rng_mask_, rng_dropout_;
  std::vector<std::int32_t> train_sample_;  // indices into train_eval_queries
  std::vector<MetricRow> metrics_;
  std::int64_t start_epoch_ = 0;
  std::int64_t global_step_ = 0;
  std::int64_t early_stop_streak_ = 0;
};

}  // namespace factlab

#endif  // FACTLAB_TRAINER_HPP_
