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

#include "factlab/trainer.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

#include "support/tmpdir.hpp"

using namespace factlab;

namespace {

struct DeskCorpus {
  Vocabulary vocab;
  testing::TmpDir dir;

  explicit DeskCorpus(RuleKind rule, GenParams p, VocabSpec spec, std::uint64_t vocab_seed = 5)
      : vocab(Vocabulary::build(spec, vocab_seed)), dir("trainer") {
    auto corpus = generate(rule, p, vocab);
    auto split = split_train_test(corpus, 0.10, p.seed + 1);
    write_corpus_dir(dir.path(), vocab, corpus, split, p.seed);
  }
};

GenParams tiny_params(std::uint64_t seed) {
  GenParams p;
  p.n = 4;
  p.m = 60;
  p.seed = seed;
  p.num_random_relations = 0;
  return p;
}

ModelConfig tiny_model(const Vocabulary& vocab) {
  ModelConfig m;
  m.num_layers = 1;
  m.num_heads = 2;
  m.hidden_size = 16;
  m.intermediate_size = 32;
  m.vocab_size = vocab.size();
  m.max_seq_len = Vocabulary::kMaxSeqLen;
  m.dropout = 0.0;
  return m;
}

TrainConfig tiny_train(std::uint64_t seed, std::int64_t epochs = 3) {
  TrainConfig t;
  t.batch_size = 32;
  t.learning_rate = 1e-3;
  t.max_epochs = epochs;
  t.eval_every = 1;
  t.seed = seed;
  t.early_stop_patience = 0;
  t.train_eval_sample = 50;
  return t;
}

}  // namespace

TEST_SUITE_BEGIN("trainer");

TEST_CASE("one-per-fact masking selects exactly one non-PAD position per fact") {
  auto vocab = Vocabulary::build(VocabSpec{50, 6, 20, 0, 0}, 1);
  TrainConfig cfg;
  Rng rng(7);
  std::vector<std::array<TokenId, 4>> facts{
      vocab.encode({vocab.entity(3), vocab.relation(1), vocab.attribute(5), false}),
      vocab.encode({vocab.entity(4), vocab.relation(2), vocab.attribute(7), true}),
  };
  for (int trial = 0; trial < 50; ++trial) {
    auto masked = dynamic_mask(facts, cfg, vocab, rng);
    REQUIRE(masked.positions.size() == 2);  // one per fact
    CHECK(masked.positions[0] < 4);
    CHECK(masked.positions[1] >= 4);
    for (std::size_t i = 0; i < masked.positions.size(); ++i) {
      auto pos = static_cast<std::size_t>(masked.positions[i]);
      CHECK(masked.input_ids[pos] == Vocabulary::kMask);
      // Target is the original token, never PAD.
      CHECK(masked.targets[i] != Vocabulary::kPad);
    }
    // 3-token fact: the PAD slot is never selected.
    CHECK(masked.positions[0] != 3);
  }
}

TEST_CASE("masking is re-sampled across epochs (dynamic)") {
  auto vocab = Vocabulary::build(VocabSpec{50, 6, 20, 0, 0}, 1);
  TrainConfig cfg;
  Rng rng(11);
  std::vector<std::array<TokenId, 4>> facts;
  for (int i = 0; i < 30; ++i)
    facts.push_back(vocab.encode({vocab.entity(i), vocab.relation(0), vocab.attribute(2), false}));
  auto first = dynamic_mask(facts, cfg, vocab, rng);
  auto second = dynamic_mask(facts, cfg, vocab, rng);
  // Identical patterns across two epochs have probability (1/3)^30.
  CHECK(first.positions != second.positions);
}

TEST_CASE("80/10/10 corruption fractions over 1e5 selections") {
  auto vocab = Vocabulary::build(VocabSpec{100, 10, 20, 0, 0}, 2);
  TrainConfig cfg;
  cfg.corrupt_80_10_10 = true;
  Rng rng(13);
  std::vector<std::array<TokenId, 4>> facts(100000);
  for (std::size_t i = 0; i < facts.size(); ++i)
    facts[i] = vocab.encode({vocab.entity(static_cast<std::int64_t>(i % 100)), vocab.relation(3),
                             vocab.attribute(4), false});
  auto masked = dynamic_mask(facts, cfg, vocab, rng);
  std::int64_t n_mask = 0, n_same = 0, n_random = 0;
  for (std::size_t i = 0; i < masked.positions.size(); ++i) {
    TokenId now = masked.input_ids[static_cast<std::size_t>(masked.positions[i])];
    if (now == Vocabulary::kMask)
      ++n_mask;
    else if (now == masked.targets[i])
      ++n_same;
    else
      ++n_random;
  }
  auto total = static_cast<double>(masked.positions.size());
  CHECK(std::fabs(n_mask / total - 0.8) < 0.01);
  // A random replacement can coincide with the original, so the observed
  // "unchanged" fraction absorbs a tiny slice of the random branch.
  CHECK(std::fabs(n_random / total - 0.1) < 0.01);
  CHECK(std::fabs(n_same / total - 0.1) < 0.011);
}

TEST_CASE("bernoulli masking leaves some facts unmasked") {
  auto vocab = Vocabulary::build(VocabSpec{100, 10, 20, 0, 0}, 2);
  TrainConfig cfg;
  cfg.masking = MaskPolicy::kBernoulli;
  Rng rng(17);
  std::vector<std::array<TokenId, 4>> facts(1000);
  for (std::size_t i = 0; i < facts.size(); ++i)
    facts[i] = vocab.encode({vocab.entity(static_cast<std::int64_t>(i % 100)), vocab.relation(1),
                             vocab.attribute(6), false});
  auto masked = dynamic_mask(facts, cfg, vocab, rng);
  // Expected selections: 3000 * 0.15 = 450.
  CHECK(masked.positions.size() > 300);
  CHECK(masked.positions.size() < 600);
}

TEST_CASE("initial loss is close to ln(vocab_size)") {
  DeskCorpus fixture(RuleKind::kSym, tiny_params(3), VocabSpec{120, 8, 2, 0, 0});
  testing::TmpDir run("run");
  auto model = tiny_model(fixture.vocab);
  auto train = tiny_train(1, /*epochs=*/1);
  Trainer trainer(fixture.vocab, TrainData::load(fixture.dir.path(), fixture.vocab), model, train,
                  run.path());
  trainer.run();
  auto lines = read_lines(run / std::string(Trainer::kMetricsFile));
  double first_loss = -1;
  for (const auto& line : lines)
    if (line.find("train,all,loss") != std::string::npos) {
      first_loss = std::stod(line.substr(line.rfind(',') + 1));
      break;
    }
  double expected = std::log(static_cast<double>(fixture.vocab.size()));
  CHECK(first_loss == doctest::Approx(expected).epsilon(0.10));
}

TEST_CASE("training is bitwise reproducible") {
  DeskCorpus fixture(RuleKind::kSym, tiny_params(5), VocabSpec{120, 8, 2, 0, 0});
  auto run_once = [&](const std::filesystem::path& dir) {
    auto model = tiny_model(fixture.vocab);
    model.dropout = 0.1;  // exercise the dropout RNG stream too
    Trainer trainer(fixture.vocab, TrainData::load(fixture.dir.path(), fixture.vocab), model,
                    tiny_train(9, 3), dir);
    trainer.run();
  };
  testing::TmpDir a("runA"), b("runB");
  run_once(a.path());
  run_once(b.path());
  CHECK(read_text_file(a / std::string(Trainer::kMetricsFile)) ==
        read_text_file(b / std::string(Trainer::kMetricsFile)));
  CHECK(read_text_file(a.path() / Trainer::kCheckpointDir / Trainer::kFinalCheckpoint) ==
        read_text_file(b.path() / Trainer::kCheckpointDir / Trainer::kFinalCheckpoint));
}

TEST_CASE("resume reproduces an uninterrupted run exactly") {
  DeskCorpus fixture(RuleKind::kSym, tiny_params(7), VocabSpec{120, 8, 2, 0, 0});
  auto model = tiny_model(fixture.vocab);
  model.dropout = 0.1;

  testing::TmpDir full("full");
  {
    Trainer trainer(fixture.vocab, TrainData::load(fixture.dir.path(), fixture.vocab), model,
                    tiny_train(21, 6), full.path());
    trainer.run();
  }

  testing::TmpDir split_run("split");
  {
    auto cfg = tiny_train(21, 6);
    cfg.checkpoint_every = 3;  // leaves ckpt_epoch3.bin behind
    cfg.max_epochs = 3;
    Trainer trainer(fixture.vocab, TrainData::load(fixture.dir.path(), fixture.vocab), model, cfg,
                    split_run.path());
    trainer.run();
  }
  {
    auto cfg = tiny_train(21, 6);
    Trainer trainer(fixture.vocab, TrainData::load(fixture.dir.path(), fixture.vocab), model, cfg,
                    split_run.path());
    trainer.run(/*resume=*/true);
  }
  CHECK(read_text_file(full / std::string(Trainer::kMetricsFile)) ==
        read_text_file(split_run / std::string(Trainer::kMetricsFile)));
  CHECK(read_text_file(full.path() / Trainer::kCheckpointDir / Trainer::kFinalCheckpoint) ==
        read_text_file(split_run.path() / Trainer::kCheckpointDir / Trainer::kFinalCheckpoint));
}

TEST_CASE("early stopping halts after the precision holds") {
  DeskCorpus fixture(RuleKind::kSym, tiny_params(11), VocabSpec{20, 4, 2, 0, 0});
  testing::TmpDir run("early");
  auto model = tiny_model(fixture.vocab);
  model.hidden_size = 32;
  model.intermediate_size = 64;
  auto cfg = tiny_train(3, /*epochs=*/400);
  cfg.learning_rate = 3e-3;
  cfg.early_stop_patience = 5;
  cfg.early_stop_precision = 0.9;  // reachable on this tiny corpus
  Trainer trainer(fixture.vocab, TrainData::load(fixture.dir.path(), fixture.vocab), model, cfg,
                  run.path());
  auto result = trainer.run();
  CHECK(result.early_stopped);
  CHECK(result.epochs_run < 400);
}

TEST_CASE("a fact with no maskable token is rejected") {
  auto vocab = Vocabulary::build(VocabSpec{10, 2, 2, 0, 0}, 1);
  TrainConfig cfg;
  Rng rng(1);
  std::vector<std::array<TokenId, 4>> facts{{Vocabulary::kPad, Vocabulary::kPad, Vocabulary::kPad,
                                             Vocabulary::kPad}};
  CHECK_THROWS_AS(dynamic_mask(facts, cfg, vocab, rng), ConfigError);
}

TEST_CASE("non-finite loss aborts with a diagnostic dump") {
  DeskCorpus fixture(RuleKind::kSym, tiny_params(15), VocabSpec{120, 8, 2, 0, 0});
  testing::TmpDir run("diverge");
  auto cfg = tiny_train(1, /*epochs=*/20);
  cfg.learning_rate = 1e18;  // guaranteed blow-up
  Trainer trainer(fixture.vocab, TrainData::load(fixture.dir.path(), fixture.vocab),
                  tiny_model(fixture.vocab), cfg, run.path());
  CHECK_THROWS_AS(trainer.run(), NumericError);
  CHECK(std::filesystem::exists(run / std::string(Trainer::kDiagnosticFile)));
}

TEST_CASE("vocabulary mismatch is rejected") {
  DeskCorpus fixture(RuleKind::kSym, tiny_params(13), VocabSpec{120, 8, 2, 0, 0});
  testing::TmpDir run("mismatch");
  auto model = tiny_model(fixture.vocab);
  model.vocab_size += 1;
  CHECK_THROWS_AS(Trainer(fixture.vocab, TrainData::load(fixture.dir.path(), fixture.vocab),
                          model, tiny_train(1), run.path()),
                  ConfigError);
}

TEST_SUITE_END();
