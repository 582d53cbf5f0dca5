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

// Command line entry point: gen / train / eval / probe / curve.
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "factlab/corpus.hpp"
#include "factlab/eval.hpp"
#include "factlab/manifest.hpp"
#include "factlab/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace factlab;

namespace {

fs::path resolve_out_dir(const std::optional<std::string>& out, const std::string& fallback) {
  if (out) return fs::path(*out);
  const char* root = std::getenv("FACTLAB_OUT_ROOT");
  if (!root || !*root)
    throw ConfigError("no --out given and FACTLAB_OUT_ROOT is not set");
  return fs::path(root) / fallback;
}

json load_json_file(const fs::path& path) {
  json j = json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw ConfigError("malformed JSON config: " + path.string());
  return j;
}

template <class T>
void apply(const std::optional<T>& flag, T& target) {
  if (flag) target = *flag;
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenArgs {
  std::string rule;
  std::optional<std::string> out;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> vocab_seed, split_seed;
  std::optional<std::int64_t> entities, relations, attributes, anti_relations, star_attributes;
  std::optional<std::int64_t> n, m, l, implied, k, group_size, schema_attrs, freq_max,
      exception_copies, controls, control_facts, star_facts;
  bool contradiction_free = false;
  double holdout = 0.1;
};

int cmd_gen(const GenArgs& a) {
  auto rule = parse_rule(a.rule);
  if (!rule) throw ConfigError("unknown rule: " + a.rule);

  // Pool sizes default to the published setup for the selected family.
  VocabSpec spec;
  if (is_memorization_rule(*rule)) {
    spec.num_entities = 125000;
    spec.num_relations = 20;
    spec.num_attributes = 2250;
  } else {
    spec.num_entities = 5000;
    spec.num_relations = 500;
    spec.num_attributes = 1000;
  }
  apply(a.entities, spec.num_entities);
  apply(a.relations, spec.num_relations);
  apply(a.attributes, spec.num_attributes);
  if (*rule == RuleKind::kAnti) spec.num_anti_relations = spec.num_relations;
  apply(a.anti_relations, spec.num_anti_relations);
  apply(a.star_attributes, spec.num_star_attributes);

  GenParams params;
  params.seed = a.seed;
  if (*rule == RuleKind::kFreq) params.n = 800000;
  if (*rule == RuleKind::kCompEnhanced) params.group_size = 10;
  apply(a.n, params.n);
  apply(a.m, params.m);
  apply(a.l, params.l);
  apply(a.implied, params.implied_per_premise);
  apply(a.k, params.k);
  apply(a.group_size, params.group_size);
  apply(a.schema_attrs, params.schema_attrs);
  apply(a.freq_max, params.freq_max);
  apply(a.exception_copies, params.exception_copies);
  apply(a.controls, params.num_random_relations);
  apply(a.control_facts, params.random_facts_per_relation);
  apply(a.star_facts, params.star_facts);
  params.contradiction_free_neg = a.contradiction_free;

  std::uint64_t vocab_seed = a.vocab_seed.value_or(a.seed);
  std::uint64_t split_seed = a.split_seed.value_or(a.seed + 1);

  fs::path dir = resolve_out_dir(a.out, a.rule + "-seed" + std::to_string(a.seed));

  RunManifest manifest;
  manifest.command = "gen";
  manifest.started = iso8601_now();

  Vocabulary vocab = Vocabulary::build(spec, vocab_seed);
  GeneratedCorpus corpus = generate(*rule, params, vocab);
  SplitCorpus split = split_train_test(corpus, a.holdout, split_seed);
  write_corpus_dir(dir, vocab, corpus, split, params.seed);

  manifest.config = {{"rule", a.rule},
                     {"vocab",
                      {{"entities", spec.num_entities},
                       {"relations", spec.num_relations},
                       {"attributes", spec.num_attributes},
                       {"anti_relations", spec.num_anti_relations},
                       {"star_attributes", spec.num_star_attributes}}},
                     {"n", params.n},
                     {"m", params.m},
                     {"l", params.l},
                     {"implied_per_premise", params.implied_per_premise},
                     {"k", params.k},
                     {"group_size", params.group_size},
                     {"schema_attrs", params.schema_attrs},
                     {"freq_max", params.freq_max},
                     {"exception_copies", params.exception_copies},
                     {"num_random_relations", params.num_random_relations},
                     {"random_facts_per_relation", params.random_facts_per_relation},
                     {"star_facts", params.star_facts},
                     {"contradiction_free_neg", params.contradiction_free_neg},
                     {"holdout", a.holdout}};
  manifest.seeds = {{"gen", a.seed}, {"vocab", vocab_seed}, {"split", split_seed}};
  for (auto name : {CorpusFiles::kVocab, CorpusFiles::kCorpus, CorpusFiles::kMeta,
                    CorpusFiles::kTrain, CorpusFiles::kTest, CorpusFiles::kTrainEval})
    manifest.artifacts.emplace_back(name);
  manifest.finished = iso8601_now();
  manifest.save(dir / CorpusFiles::kManifest);

  std::cout << "rule " << a.rule << ": C=" << corpus.count(Origin::kC)
            << " D=" << corpus.count(Origin::kD) << " lines=" << corpus.emission_count()
            << " train=" << split.train_records.size() << " test=" << split.test.size()
            << " dropped_duplicates=" << split.dropped_duplicate_queries << "\n"
            << "wrote " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string corpus;
  std::optional<std::string> out;
  std::optional<std::string> model_config_file, train_config_file;
  std::optional<std::int64_t> layers, heads, hidden, intermediate;
  std::optional<double> dropout;
  std::optional<bool> tie_embeddings;
  std::optional<std::int64_t> batch_size, epochs, eval_every, checkpoint_every, patience, sample;
  std::optional<double> lr, early_stop_precision, grad_clip;
  std::optional<std::string> masking;
  std::optional<bool> corrupt;
  std::optional<std::uint64_t> seed;
  bool resume = false;
};

int cmd_train(const TrainArgs& a) {
  fs::path corpus_dir(a.corpus);
  Vocabulary vocab = Vocabulary::load(corpus_dir / CorpusFiles::kVocab);

  ModelConfig model;
  if (a.model_config_file) model = ModelConfig::from_json(load_json_file(*a.model_config_file));
  apply(a.layers, model.num_layers);
  apply(a.heads, model.num_heads);
  apply(a.hidden, model.hidden_size);
  apply(a.intermediate, model.intermediate_size);
  apply(a.dropout, model.dropout);
  apply(a.tie_embeddings, model.tie_embeddings);
  model.vocab_size = vocab.size();
  model.max_seq_len = Vocabulary::kMaxSeqLen;
  model.validate();

  TrainConfig train;
  if (a.train_config_file) train = TrainConfig::from_json(load_json_file(*a.train_config_file));
  apply(a.batch_size, train.batch_size);
  apply(a.lr, train.learning_rate);
  apply(a.epochs, train.max_epochs);
  apply(a.eval_every, train.eval_every);
  apply(a.checkpoint_every, train.checkpoint_every);
  apply(a.patience, train.early_stop_patience);
  apply(a.early_stop_precision, train.early_stop_precision);
  apply(a.sample, train.train_eval_sample);
  apply(a.grad_clip, train.grad_clip_norm);
  apply(a.seed, train.seed);
  apply(a.corrupt, train.corrupt_80_10_10);
  if (a.masking) {
    if (*a.masking == "one_per_fact")
      train.masking = MaskPolicy::kOnePerFact;
    else if (*a.masking == "bernoulli")
      train.masking = MaskPolicy::kBernoulli;
    else
      throw ConfigError("unknown masking policy: " + *a.masking);
  }
  train.validate();

  fs::path run_dir = resolve_out_dir(a.out, "train-seed" + std::to_string(train.seed));
  fs::create_directories(run_dir);

  RunManifest manifest;
  manifest.command = "train";
  manifest.started = iso8601_now();
  manifest.config = {{"corpus", corpus_dir.string()},
                     {"model", model.to_json()},
                     {"train", train.to_json()},
                     {"resume", a.resume}};
  manifest.seeds = {{"train", train.seed}};
  for (auto name : {CorpusFiles::kVocab, CorpusFiles::kTrain, CorpusFiles::kTest,
                    CorpusFiles::kTrainEval}) {
    auto p = corpus_dir / name;
    if (fs::exists(p)) manifest.add_input(p);
  }

  TrainData data = TrainData::load(corpus_dir, vocab);
  Trainer trainer(vocab, std::move(data), model, train, run_dir);
  TrainResult result = trainer.run(a.resume);

  manifest.artifacts = {std::string(Trainer::kMetricsFile),
                        std::string(Trainer::kCheckpointDir) + "/" +
                            std::string(Trainer::kFinalCheckpoint)};
  manifest.finished = iso8601_now();
  manifest.save(run_dir / "manifest.json");

  std::cout << "trained " << result.epochs_run << " epochs (" << result.steps << " steps)"
            << (result.early_stopped ? ", early stop" : "") << "\n"
            << "checkpoint " << result.final_checkpoint.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string corpus;
  std::optional<std::string> out;
  std::string split = "test";
  std::int64_t sample = 0;
  std::uint64_t sample_seed = 0;
  int topk = 10;
  std::int64_t batch_size = 512;
};

void print_report_table(const EvalReport& report) {
  auto line = [](const std::string& name, const CategoryStat& s) {
    std::printf("%-24s %10s %10s %8lld\n", name.c_str(),
                format_double(s.precision()).c_str(), format_double(s.hit_rate()).c_str(),
                static_cast<long long>(s.count));
  };
  std::printf("%-24s %10s %10s %8s\n", "category", "prec@m", "hits@m", "count");
  line("all", report.overall);
  for (const auto& [name, s] : report.per_category) line(name, s);
}

int cmd_eval(const EvalArgs& a) {
  if (a.split != "test" && a.split != "train")
    throw ConfigError("--split must be test or train");
  fs::path corpus_dir(a.corpus);
  Vocabulary vocab = Vocabulary::load(corpus_dir / CorpusFiles::kVocab);
  auto ckpt = load_checkpoint(a.checkpoint);
  if (ckpt.params.config.vocab_size != vocab.size())
    throw ConfigError("checkpoint vocabulary size does not match the corpus");

  auto queries = load_queries(
      corpus_dir / (a.split == "test" ? CorpusFiles::kTest : CorpusFiles::kTrainEval), vocab);
  if (queries.empty()) throw IoError("no queries for split " + a.split);
  if (a.sample > 0 && a.sample < static_cast<std::int64_t>(queries.size())) {
    Rng rng(a.sample_seed);
    auto picks = rng.sample_distinct(static_cast<std::int64_t>(queries.size()), a.sample);
    std::vector<TestQuery> subset;
    subset.reserve(picks.size());
    for (auto p : picks) subset.push_back(std::move(queries[static_cast<std::size_t>(p)]));
    queries = std::move(subset);
  }

  fs::path out_dir = resolve_out_dir(a.out, "eval");
  fs::create_directories(out_dir);

  RunManifest manifest;
  manifest.command = "eval";
  manifest.started = iso8601_now();
  manifest.config = {{"checkpoint", a.checkpoint}, {"corpus", a.corpus},   {"split", a.split},
                     {"sample", a.sample},         {"topk", a.topk},       {"batch", a.batch_size}};
  manifest.seeds = {{"sample", a.sample_seed}};
  manifest.add_input(a.checkpoint);

  std::ofstream dump(out_dir / "queries.jsonl", std::ios::trunc);
  EvalOptions opts;
  opts.batch_size = a.batch_size;
  opts.dump_top_k = a.topk;
  opts.per_query_dump = &dump;

  Evaluator ev(ckpt.params, vocab);
  EvalReport report = ev.evaluate(queries, opts);

  write_text_file(out_dir / "report.json", report.to_json().dump(2) + "\n");
  write_text_file(out_dir / "report.csv", report.to_csv());
  manifest.artifacts = {"report.json", "report.csv", "queries.jsonl"};
  manifest.finished = iso8601_now();
  manifest.save(out_dir / "manifest.json");

  print_report_table(report);
  return 0;
}

// ---------------------------------------------------------------------------
// probe
// ---------------------------------------------------------------------------

struct ProbeArgs {
  std::string kind;
  std::string checkpoint;
  std::string corpus;
  std::optional<std::string> out;
  std::int64_t batch_size = 512;
};

// Control facts used in training: corpus lines whose sidecar record says
// category == "random" and in_train.
std::vector<Fact> load_train_control_facts(const fs::path& corpus_dir, const Vocabulary& vocab) {
  auto lines = read_lines(corpus_dir / CorpusFiles::kCorpus);
  auto meta = read_lines(corpus_dir / CorpusFiles::kMeta);
  if (lines.size() != meta.size()) throw IoError("corpus/meta line count mismatch");
  std::vector<Fact> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (meta[i].empty()) continue;
    json j = json::parse(meta[i], nullptr, false);
    if (j.is_discarded()) throw IoError("malformed meta record");
    if (j.value("category", "") == kCategoryRandom && j.value("in_train", false))
      out.push_back(vocab.parse_fact(lines[i]));
  }
  return out;
}

std::vector<TestQuery> filter_category(std::vector<TestQuery> queries, std::string_view cat) {
  std::erase_if(queries, [&](const TestQuery& q) { return q.category != cat; });
  return queries;
}

int cmd_probe(const ProbeArgs& a) {
  fs::path corpus_dir(a.corpus);
  Vocabulary vocab = Vocabulary::load(corpus_dir / CorpusFiles::kVocab);
  auto ckpt = load_checkpoint(a.checkpoint);
  if (ckpt.params.config.vocab_size != vocab.size())
    throw ConfigError("checkpoint vocabulary size does not match the corpus");

  ProbeResult result;
  if (a.kind == "sym-overgen") {
    auto controls = load_train_control_facts(corpus_dir, vocab);
    result = probe_symmetry_overgen(ckpt.params, vocab, controls, a.batch_size);
  } else if (a.kind == "neg-flip") {
    auto star = filter_category(
        load_queries(corpus_dir / CorpusFiles::kTrainEval, vocab), kCategoryStar);
    result = probe_neg_flip(ckpt.params, vocab, star, a.batch_size);
  } else if (a.kind == "anti-leak") {
    auto anti = filter_category(load_queries(corpus_dir / CorpusFiles::kTest, vocab), "anti");
    result = probe_anti_symmetric_leak(ckpt.params, vocab, anti, a.batch_size);
  } else {
    throw ConfigError("unknown probe kind: " + a.kind);
  }

  fs::path out_dir = resolve_out_dir(a.out, "probe-" + a.kind);
  fs::create_directories(out_dir);
  RunManifest manifest;
  manifest.command = "probe";
  manifest.started = iso8601_now();
  manifest.config = {{"kind", a.kind}, {"checkpoint", a.checkpoint}, {"corpus", a.corpus}};
  manifest.add_input(a.checkpoint);
  write_text_file(out_dir / "probe.json", result.details().dump(2) + "\n");
  manifest.artifacts = {"probe.json"};
  manifest.finished = iso8601_now();
  manifest.save(out_dir / "manifest.json");

  std::cout << result.kind << " rate=" << format_double(result.rate) << " over " << result.count
            << " queries\n";
  for (const auto& [key, value] : result.extras)
    std::cout << "  " << key << "=" << format_double(value) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// curve
// ---------------------------------------------------------------------------

struct CurveArgs {
  std::string run;
  std::optional<std::string> out;
};

int cmd_curve(const CurveArgs& a) {
  fs::path run_dir(a.run);
  fs::path metrics = run_dir / Trainer::kMetricsFile;
  if (!fs::exists(metrics)) throw IoError("no metric log under " + run_dir.string());
  fs::path out_dir = resolve_out_dir(a.out, "curves");
  auto files = write_learning_curves(metrics, out_dir);

  RunManifest manifest;
  manifest.command = "curve";
  manifest.started = iso8601_now();
  manifest.config = {{"run", a.run}};
  manifest.add_input(metrics);
  manifest.artifacts = files;
  manifest.finished = iso8601_now();
  manifest.save(out_dir / "manifest.json");

  for (const auto& f : files) std::cout << (out_dir / f).string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic fact corpora, masked-LM training and cloze evaluation"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate a corpus with train/test split");
  g->add_option("--rule", gen.rule,
                "equi|sym|inv|comp|imp|neg|anti|inv-anti|comp-enhanced|freq|schema")
      ->required();
  g->add_option("--out", gen.out, "output directory");
  g->add_option("--seed", gen.seed, "generation seed");
  g->add_option("--vocab-seed", gen.vocab_seed, "vocabulary seed (default: --seed)");
  g->add_option("--split-seed", gen.split_seed, "train/test split seed (default: seed+1)");
  g->add_option("--entities", gen.entities);
  g->add_option("--relations", gen.relations);
  g->add_option("--attributes", gen.attributes);
  g->add_option("--anti-relations", gen.anti_relations);
  g->add_option("--star-attributes", gen.star_attributes);
  g->add_option("--n", gen.n, "rule instances (outer loop)");
  g->add_option("--m", gen.m, "facts per instance (inner loop)");
  g->add_option("--l", gen.l, "IMP premise attributes per relation pair");
  g->add_option("--implied-per-premise", gen.implied);
  g->add_option("--k", gen.k, "SCHEMA entity groups");
  g->add_option("--group-size", gen.group_size);
  g->add_option("--schema-attrs", gen.schema_attrs);
  g->add_option("--freq-max", gen.freq_max);
  g->add_option("--exception-copies", gen.exception_copies);
  g->add_option("--controls", gen.controls, "control relations (-1 mirrors --n, 0 disables)");
  g->add_option("--control-facts", gen.control_facts, "facts per control relation");
  g->add_option("--star-facts", gen.star_facts, "NEG: random A* facts");
  g->add_flag("--contradiction-free-neg", gen.contradiction_free);
  g->add_option("--holdout", gen.holdout, "test fraction of D");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "pretrain the masked LM on a corpus");
  t->add_option("--corpus", train.corpus, "corpus directory from gen")->required();
  t->add_option("--out", train.out, "run directory");
  t->add_option("--model-config", train.model_config_file, "model config JSON");
  t->add_option("--train-config", train.train_config_file, "train config JSON");
  t->add_option("--layers", train.layers);
  t->add_option("--heads", train.heads);
  t->add_option("--hidden", train.hidden);
  t->add_option("--intermediate", train.intermediate);
  t->add_option("--dropout", train.dropout);
  t->add_option("--tie-embeddings", train.tie_embeddings);
  t->add_option("--batch-size", train.batch_size);
  t->add_option("--lr", train.lr);
  t->add_option("--epochs", train.epochs);
  t->add_option("--eval-every", train.eval_every);
  t->add_option("--checkpoint-every", train.checkpoint_every);
  t->add_option("--masking", train.masking, "one_per_fact|bernoulli");
  t->add_option("--corrupt-80-10-10", train.corrupt);
  t->add_option("--seed", train.seed);
  t->add_option("--early-stop-precision", train.early_stop_precision);
  t->add_option("--early-stop-patience", train.patience, "epochs; 0 disables");
  t->add_option("--train-eval-sample", train.sample);
  t->add_option("--grad-clip", train.grad_clip, "global norm; 0 disables");
  t->add_flag("--resume", train.resume, "continue from the latest checkpoint");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "cloze evaluation of a checkpoint");
  e->add_option("--checkpoint", eval.checkpoint)->required();
  e->add_option("--corpus", eval.corpus, "corpus directory (vocab + queries)")->required();
  e->add_option("--out", eval.out, "report directory");
  e->add_option("--split", eval.split, "test|train");
  e->add_option("--sample", eval.sample, "evaluate a random subset (0: all)");
  e->add_option("--sample-seed", eval.sample_seed);
  e->add_option("--topk", eval.topk, "per-query dump depth");
  e->add_option("--batch-size", eval.batch_size);

  ProbeArgs probe;
  auto* p = app.add_subcommand("probe", "diagnostic probes");
  p->add_option("--kind", probe.kind, "sym-overgen|neg-flip|anti-leak")->required();
  p->add_option("--checkpoint", probe.checkpoint)->required();
  p->add_option("--corpus", probe.corpus)->required();
  p->add_option("--out", probe.out);
  p->add_option("--batch-size", probe.batch_size);

  CurveArgs curve;
  auto* c = app.add_subcommand("curve", "learning curve CSVs from a run");
  c->add_option("--run", curve.run, "run directory with metrics.csv")->required();
  c->add_option("--out", curve.out, "output directory");

  try {
    app.parse(argc, argv);
    if (g->parsed()) return cmd_gen(gen);
    if (t->parsed()) return cmd_train(train);
    if (e->parsed()) return cmd_eval(eval);
    if (p->parsed()) return cmd_probe(probe);
    if (c->parsed()) return cmd_curve(curve);
  } catch (const CLI::ParseError& err) {
    int code = app.exit(err);
    return code == 0 ? 0 : 1;
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  return 1;
}
