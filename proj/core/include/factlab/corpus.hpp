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

#ifndef FACTLAB_CORPUS_HPP_
#define FACTLAB_CORPUS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "factlab/vocab.hpp"

namespace factlab {

class Rng;

enum class RuleKind {
  kEqui,
  kSym,
  kInv,
  kComp,
  kImp,
  kNeg,
  kAnti,
  kInvAnti,
  kCompEnhanced,
  kFreq,
  kSchema,
};

std::string_view rule_name(RuleKind rule);
std::optional<RuleKind> parse_rule(std::string_view name);
/// True for FREQ/SCHEMA corpora, where C is both training and test set.
bool is_memorization_rule(RuleKind rule);

/// Knobs shared by all generators; each generator reads the subset it needs.
struct GenParams {
  std::int64_t n = 20;                  // outer loop: rule instances
  std::int64_t m = 800;                 // inner loop: facts per instance
  std::int64_t l = 2;                   // IMP: premise attributes per relation pair
  std::int64_t implied_per_premise = 4; // IMP: implied facts per premise
  std::int64_t k = 250;                 // SCHEMA: entity groups
  std::int64_t group_size = 250;        // SCHEMA: 250; COMP-enhanced: 10
  std::int64_t schema_attrs = 10;       // SCHEMA: attributes per schema relation
  std::int64_t freq_max = 100;          // FREQ: highest repetition count
  std::int64_t exception_copies = 1;    // SCHEMA: 10 for the frequency-interaction variant
  std::int64_t num_random_relations = -1;     // control group; -1 mirrors n
  std::int64_t random_facts_per_relation = -1;  // -1 mirrors m
  std::int64_t star_facts = -1;         // NEG: random A* facts; -1 mirrors n*m when A* exists
  bool contradiction_free_neg = false;  // reject (e,r) pairs sampled twice in NEG
  std::uint64_t seed = 0;

  void validate(RuleKind rule, const VocabSpec& vocab) const;
};

/// Which side of the generator output a fact landed on. C always enters
/// training; D is split 90/10 into train/test (memorization corpora have
/// no D and use C as both).
enum class Origin : std::uint8_t { kC, kD };

/// One generation event. `multiplicity` is the number of corpus lines this
/// fact is emitted as (1 except for FREQ buckets and repeated exceptions).
struct FactRecord {
  Fact fact;
  Origin origin = Origin::kC;
  std::int32_t category = 0;        // index into GeneratedCorpus::categories
  std::int64_t instance = -1;       // rule instance id, -1 for control facts
  std::int32_t multiplicity = 1;
  TokenId probe_entity = -1;        // ANTI: premise subject, for the leak probe
};

struct GeneratedCorpus {
  RuleKind rule = RuleKind::kSym;
  std::vector<std::string> categories;
  std::vector<FactRecord> records;  // shuffled emission order is decided at write time

  std::int32_t intern_category(std::string_view name);
  const std::string& category_name(std::int32_t id) const { return categories.at(static_cast<std::size_t>(id)); }
  std::optional<std::int32_t> find_category(std::string_view name) const;

  std::int64_t count(Origin origin) const;
  std::int64_t count(Origin origin, std::string_view category) const;
  /// Total emitted lines (sum of multiplicities).
  std::int64_t emission_count() const;
};

// Category labels used by the generators.
inline constexpr std::string_view kCategoryRandom = "random";
inline constexpr std::string_view kCategoryStar = "star";
inline constexpr std::string_view kCategoryEvidence = "evidence";
inline constexpr std::string_view kCategorySamegroup = "samegroup";
inline constexpr std::string_view kCategoryGroupAttribute = "group_attribute";
inline constexpr std::string_view kCategoryException = "exception";
inline constexpr std::string_view kCategoryUniqueAttribute = "unique_attribute";
std::string freq_bucket_category(std::int64_t bucket);

// ---------------------------------------------------------------------------
// Generators. Each is deterministic in (params, vocab): the full output is a
// pure function of the parameter seed and the vocabulary.
// ---------------------------------------------------------------------------

GeneratedCorpus gen_equi(const GenParams& params, const Vocabulary& vocab);
GeneratedCorpus gen_sym(const GenParams& params, const Vocabulary& vocab);
GeneratedCorpus gen_inv(const GenParams& params, const Vocabulary& vocab);
GeneratedCorpus gen_comp(const GenParams& params, const Vocabulary& vocab);
GeneratedCorpus gen_imp(const GenParams& params, const Vocabulary& vocab);
GeneratedCorpus gen_neg(const GenParams& params, const Vocabulary& vocab);
GeneratedCorpus gen_anti(const GenParams& params, const Vocabulary& vocab);
GeneratedCorpus gen_inv_antievidence(const GenParams& params, const Vocabulary& vocab);
GeneratedCorpus gen_comp_enhanced(const GenParams& params, const Vocabulary& vocab);
GeneratedCorpus gen_freq(const GenParams& params, const Vocabulary& vocab);
GeneratedCorpus gen_schema(const GenParams& params, const Vocabulary& vocab);

enum class FactKind { kEntity, kAttribute };

/// Random facts over a disjoint relation pool (the control group). Appended
/// to C with category "random".
std::vector<FactRecord> gen_random_control(const GenParams& params, const Vocabulary& vocab,
                                           FactKind kind, std::int32_t category, Rng& rng);

/// Dispatch on rule; includes the control portion where the paper's setup
/// has one.
GeneratedCorpus generate(RuleKind rule, const GenParams& params, const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Train/test split
// ---------------------------------------------------------------------------

/// A cloze query: the object slot of `fact` is masked, `gold` is every
/// object seen with (subject, relation, negated) anywhere in C or D.
struct TestQuery {
  Fact fact;
  std::vector<TokenId> gold;  // sorted ascending, deduplicated
  std::string category;
  std::int64_t instance = -1;
  std::int32_t multiplicity = 1;
  TokenId probe_entity = -1;
};

struct SplitCorpus {
  double holdout = 0.1;
  std::vector<std::int32_t> train_records;  // indices into GeneratedCorpus::records
  std::vector<TestQuery> test;              // from held-out D (or all of C for memorization)
  std::vector<TestQuery> train_eval;        // one per train record, gold over C and D
  std::int64_t dropped_duplicate_queries = 0;  // test facts whose string occurs in train
};

/// 90/10 split of D per the standard recipe. Memorization corpora (empty D)
/// come back with train = test = all records. Throws ConfigError for
/// holdout outside (0,1) and for an empty-D rule corpus.
SplitCorpus split_train_test(const GeneratedCorpus& corpus, double holdout, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Corpus directory I/O
// ---------------------------------------------------------------------------

struct CorpusFiles {
  static constexpr std::string_view kVocab = "vocab.tsv";
  static constexpr std::string_view kCorpus = "corpus.txt";
  static constexpr std::string_view kMeta = "meta.jsonl";
  static constexpr std::string_view kTrain = "train.txt";
  static constexpr std::string_view kTest = "test.jsonl";
  static constexpr std::string_view kTrainEval = "train_eval.jsonl";
  static constexpr std::string_view kManifest = "manifest.json";
};

/// Writes vocab.tsv, corpus.txt (all emissions, shuffled with the corpus
/// seed), meta.jsonl (one record per corpus line), train.txt, test.jsonl and
/// train_eval.jsonl into `dir`.
void write_corpus_dir(const std::filesystem::path& dir, const Vocabulary& vocab,
                      const GeneratedCorpus& corpus, const SplitCorpus& split,
                      std::uint64_t shuffle_seed);

std::vector<TestQuery> load_queries(const std::filesystem::path& jsonl_path,
                                    const Vocabulary& vocab);

/// Token-encodes every fact line of a corpus text file.
std::vector<std::array<TokenId, Vocabulary::kMaxSeqLen>> load_fact_lines(
    const std::filesystem::path& path, const Vocabulary& vocab);

}  // namespace factlab

#endif  // FACTLAB_CORPUS_HPP_
