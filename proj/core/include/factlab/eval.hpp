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

#ifndef FACTLAB_EVAL_HPP_
#define FACTLAB_EVAL_HPP_

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "factlab/corpus.hpp"
#include "factlab/model.hpp"

namespace factlab {

/// Candidate ranking over the full vocabulary excluding special tokens,
/// ordered by score descending with ties broken by ascending token id.
/// Returns the top k candidate ids.
std::vector<TokenId> top_candidates(std::span<const float> logits, const Vocabulary& vocab,
                                    std::size_t k);

/// |top-m of logits ∩ gold| / m with m = |gold|. `gold` must be sorted and
/// non-empty.
double precision_at_m(std::span<const float> logits, const std::vector<TokenId>& gold,
                      const Vocabulary& vocab);

struct CategoryStat {
  double precision_sum = 0.0;
  double hit_sum = 0.0;  // object-of-record found in top-m
  std::int64_t count = 0;

  double precision() const { return count ? precision_sum / static_cast<double>(count) : 0.0; }
  double hit_rate() const { return count ? hit_sum / static_cast<double>(count) : 0.0; }
};

/// precision@m is the paper's query metric; hits@m attributes a result to
/// the specific fact behind a query, which is what the per-category
/// memorization breakdowns need.
struct EvalReport {
  CategoryStat overall;  // derived from per_category sums, so the
                         // query-weighted recombination is exact
  std::map<std::string, CategoryStat> per_category;
  std::map<std::string, CategoryStat> per_relation;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

struct EvalOptions {
  std::int64_t batch_size = 512;
  int dump_top_k = 10;
  std::ostream* per_query_dump = nullptr;  // JSON lines when non-null
};

/// Stateless cloze evaluation over a frozen parameter snapshot.
class Evaluator {
 public:
  Evaluator(const ModelParams<float>& params, const Vocabulary& vocab)
      : params_(&params), vocab_(&vocab) {}

  EvalReport evaluate(std::span<const TestQuery> queries, const EvalOptions& opts = {}) const;

  /// Top-k ranked candidates for each cloze query (object slot masked).
  std::vector<std::vector<TokenId>> rank_queries(std::span<const Fact> queries, std::size_t k,
                                                 std::int64_t batch_size = 512) const;

 private:
  const ModelParams<float>* params_;
  const Vocabulary* vocab_;
};

// ---------------------------------------------------------------------------
// Diagnostic probes
// ---------------------------------------------------------------------------

struct ProbeResult {
  std::string kind;
  double rate = 0.0;
  std::int64_t count = 0;
  nlohmann::json details() const;
  std::map<std::string, double> extras;
};

/// Fraction of reversed control facts (f, r, MASK) whose top-1 prediction
/// is the original subject e. Pure aggregation over precomputed top-1 ids.
double symmetry_overgen_rate(std::span<const Fact> control_facts,
                             std::span<const TokenId> reversed_top1);

/// Trains nothing: queries the model with each control fact reversed.
/// Throws ConfigError when `control_facts` is empty.
ProbeResult probe_symmetry_overgen(const ModelParams<float>& params, const Vocabulary& vocab,
                                   std::span<const Fact> control_facts,
                                   std::int64_t batch_size = 512);

/// Fraction of trained A* facts whose object stays in the top-m for both the
/// original and the negation-flipped query form (m = gold size of the
/// original form).
ProbeResult probe_neg_flip(const ModelParams<float>& params, const Vocabulary& vocab,
                           std::span<const TestQuery> star_queries, std::int64_t batch_size = 512);

/// ANTI leak: fraction of anti test queries whose top-m contains the premise
/// subject (the symmetric completion). rate = leak; extras carry the
/// recognition rate (1 - leak) and precision@m against the true gold.
ProbeResult probe_anti_symmetric_leak(const ModelParams<float>& params, const Vocabulary& vocab,
                                      std::span<const TestQuery> anti_queries,
                                      std::int64_t batch_size = 512);

// ---------------------------------------------------------------------------
// Learning curves
// ---------------------------------------------------------------------------

/// Pivots a metric log (CSV rows epoch,step,split,category,metric,value)
/// into one wide epoch-indexed CSV per (split, metric) under `out_dir`,
/// named curve_<split>_<metric>.csv. Returns the written file names.
/// Validates the log fully before writing anything.
std::vector<std::string> write_learning_curves(const std::filesystem::path& metrics_csv,
                                               const std::filesystem::path& out_dir);

/// Spearman rank correlation with tie-averaged ranks.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace factlab

#endif  // FACTLAB_EVAL_HPP_
