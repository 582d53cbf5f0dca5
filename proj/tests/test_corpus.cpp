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

#include "factlab/corpus.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "factlab/rng.hpp"
#include "support/tmpdir.hpp"

using namespace factlab;

namespace {

Vocabulary small_vocab(std::int64_t entities = 300, std::int64_t relations = 20,
                       std::int64_t attributes = 40, std::int64_t anti = 0,
                       std::int64_t star = 0, std::uint64_t seed = 5) {
  return Vocabulary::build(VocabSpec{entities, relations, attributes, anti, star}, seed);
}

// Instance-grouped view used by the closure oracles.
struct InstanceView {
  std::vector<const FactRecord*> c, d;
};

std::map<std::int64_t, InstanceView> by_instance(const GeneratedCorpus& corpus,
                                                 std::string_view category) {
  std::map<std::int64_t, InstanceView> out;
  auto cat = corpus.find_category(category);
  REQUIRE(cat.has_value());
  for (const auto& r : corpus.records) {
    if (r.category != *cat) continue;
    auto& inst = out[r.instance];
    (r.origin == Origin::kC ? inst.c : inst.d).push_back(&r);
  }
  return out;
}

std::unordered_set<Fact, FactHash> fact_set(const GeneratedCorpus& corpus, Origin origin) {
  std::unordered_set<Fact, FactHash> out;
  for (const auto& r : corpus.records)
    if (r.origin == origin) out.insert(r.fact);
  return out;
}

GenParams desk_params(std::int64_t n, std::int64_t m, std::uint64_t seed) {
  GenParams p;
  p.n = n;
  p.m = m;
  p.seed = seed;
  p.num_random_relations = 0;  // rule portion only unless a test asks for controls
  return p;
}

}  // namespace

TEST_SUITE_BEGIN("corpus");

TEST_CASE("EQUI counts and closure") {
  auto vocab = small_vocab();
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    auto c = gen_equi(desk_params(20, 800, seed), vocab);
    CHECK(c.count(Origin::kC) == 16000);
    CHECK(c.count(Origin::kD) == 16000);
    for (const auto& [id, inst] : by_instance(c, "equi")) {
      REQUIRE(inst.c.size() == 1);
      REQUIRE(inst.d.size() == 1);
      // Same entity and attribute, relations forming the sampled pair.
      CHECK(inst.c[0]->fact.subject == inst.d[0]->fact.subject);
      CHECK(inst.c[0]->fact.object == inst.d[0]->fact.object);
      CHECK(!inst.c[0]->fact.negated);
      CHECK(!inst.d[0]->fact.negated);
    }
  }
}

TEST_CASE("EQUI single instance shares e and a, differs in relation") {
  auto vocab = small_vocab();
  auto c = gen_equi(desk_params(1, 1, 7), vocab);
  REQUIRE(c.records.size() == 2);
  CHECK(c.records[0].origin == Origin::kC);
  CHECK(c.records[1].origin == Origin::kD);
  CHECK(c.records[0].fact.subject == c.records[1].fact.subject);
  CHECK(c.records[0].fact.object == c.records[1].fact.object);
}

TEST_CASE("SYM counts and argument-swap closure") {
  auto vocab = small_vocab();
  auto c = gen_sym(desk_params(20, 800, 11), vocab);
  CHECK(c.count(Origin::kC) == 16000);
  CHECK(c.count(Origin::kD) == 16000);
  for (const auto& [id, inst] : by_instance(c, "sym")) {
    REQUIRE(inst.c.size() == 1);
    REQUIRE(inst.d.size() == 1);
    const Fact& p = inst.c[0]->fact;
    const Fact& q = inst.d[0]->fact;
    CHECK(q.subject == p.object);
    CHECK(q.object == p.subject);
    CHECK(q.relation == p.relation);
  }
}

TEST_CASE("SYM self-pairs are permitted") {
  // A 1-entity pool forces e == f; C and D facts coincide as strings.
  auto vocab = small_vocab(1, 4, 2);
  auto c = gen_sym(desk_params(2, 3, 0), vocab);
  for (const auto& r : c.records) CHECK(r.fact.subject == r.fact.object);
}

TEST_CASE("INV counts and closure") {
  auto vocab = small_vocab();
  auto c = gen_inv(desk_params(20, 800, 21), vocab);
  CHECK(c.count(Origin::kC) == 16000);
  CHECK(c.count(Origin::kD) == 16000);
  for (const auto& [id, inst] : by_instance(c, "inv")) {
    const Fact& p = inst.c.at(0)->fact;
    const Fact& q = inst.d.at(0)->fact;
    CHECK(q.subject == p.object);
    CHECK(q.object == p.subject);
  }
}

TEST_CASE("COMP counts and two-premise closure") {
  auto vocab = small_vocab();
  auto c = gen_comp(desk_params(20, 800, 31), vocab);
  CHECK(c.count(Origin::kC) == 32000);
  CHECK(c.count(Origin::kD) == 16000);
  for (const auto& [id, inst] : by_instance(c, "comp")) {
    REQUIRE(inst.c.size() == 2);
    REQUIRE(inst.d.size() == 1);
    const Fact& first = inst.c[0]->fact;
    const Fact& second = inst.c[1]->fact;
    const Fact& conclusion = inst.d[0]->fact;
    CHECK(first.object == second.subject);          // chain e -> f -> g
    CHECK(conclusion.subject == first.subject);
    CHECK(conclusion.object == second.object);
  }
}

TEST_CASE("COMP m=1 gives exactly one 3-fact chain") {
  auto c = gen_comp(desk_params(1, 1, 0), small_vocab());
  CHECK(c.records.size() == 3);
}

TEST_CASE("IMP counts and four implied facts per premise") {
  auto vocab = small_vocab();
  GenParams p = desk_params(20, 800, 41);
  p.l = 2;
  auto c = gen_imp(p, vocab);
  CHECK(c.count(Origin::kC) == 32000);   // n * l * m premises
  CHECK(c.count(Origin::kD) == 128000);  // 4 implied facts each
  for (const auto& [id, inst] : by_instance(c, "imp")) {
    REQUIRE(inst.c.size() == 1);
    REQUIRE(inst.d.size() == 4);
    for (const auto* d : inst.d) CHECK(d->fact.subject == inst.c[0]->fact.subject);
  }
}

TEST_CASE("IMP minimal instance") {
  GenParams p = desk_params(1, 1, 0);
  p.l = 1;
  auto c = gen_imp(p, small_vocab());
  CHECK(c.count(Origin::kC) == 1);
  CHECK(c.count(Origin::kD) == 4);
}

TEST_CASE("NEG counts, antonym closure and coin branches") {
  auto vocab = small_vocab();
  auto c = gen_neg(desk_params(20, 800, 51), vocab);
  CHECK(c.count(Origin::kC) == 16000);
  CHECK(c.count(Origin::kD) == 16000);
  bool saw_negated_c = false, saw_plain_c = false;
  for (const auto& [id, inst] : by_instance(c, "neg")) {
    const Fact& p = inst.c.at(0)->fact;
    const Fact& q = inst.d.at(0)->fact;
    CHECK(p.subject == q.subject);
    CHECK(p.relation == q.relation);
    CHECK(p.negated != q.negated);
    CHECK(vocab.antonym(p.object) == q.object);
    // Applying the transform twice returns the original fact.
    CHECK(vocab.antonym(q.object) == p.object);
    saw_negated_c |= p.negated;
    saw_plain_c |= !p.negated;
  }
  CHECK(saw_negated_c);
  CHECK(saw_plain_c);
}

TEST_CASE("NEG contradiction-free sampling never reuses a (relation, entity) pair") {
  auto vocab = small_vocab(500, 4, 20);
  GenParams p = desk_params(2, 100, 3);
  p.contradiction_free_neg = true;
  auto c = gen_neg(p, vocab);
  std::unordered_set<std::int64_t> used;
  for (const auto& r : c.records) {
    if (r.origin != Origin::kC) continue;
    auto key = static_cast<std::int64_t>(r.fact.relation) * 100000 + r.fact.subject;
    CHECK(used.insert(key).second);
  }
}

TEST_CASE("NEG star facts are emitted over A* when the pool exists") {
  auto vocab = small_vocab(100, 10, 20, 0, /*star=*/30);
  GenParams p = desk_params(4, 50, 5);
  p.star_facts = 120;
  auto c = gen_neg(p, vocab);
  CHECK(c.count(Origin::kC, kCategoryStar) == 120);
  auto cat = c.find_category(kCategoryStar);
  bool saw_negated = false, saw_plain = false;
  for (const auto& r : c.records) {
    if (r.category != *cat) continue;
    CHECK(vocab.symbol_class(r.fact.object) == SymbolClass::kStarAttribute);
    saw_negated |= r.fact.negated;
    saw_plain |= !r.fact.negated;
  }
  CHECK(saw_negated);
  CHECK(saw_plain);
}

TEST_CASE("random controls use the disjoint half of the relation pool") {
  auto vocab = small_vocab(100, 20, 10);
  GenParams p = desk_params(20, 800, 5);
  p.num_random_relations = -1;  // mirror the rule portion
  auto corpus = generate(RuleKind::kSym, p, vocab);
  CHECK(corpus.count(Origin::kC, kCategoryRandom) == 16000);
  auto cat = corpus.find_category(kCategoryRandom);
  std::unordered_set<TokenId> rule_rels, control_rels;
  for (const auto& r : corpus.records) {
    if (r.category == *cat) {
      control_rels.insert(r.fact.relation);
      CHECK(r.instance == -1);
    } else {
      rule_rels.insert(r.fact.relation);
    }
  }
  for (TokenId r : control_rels) CHECK(!rule_rels.count(r));
  // Attribute-type controls for attribute-fact rules.
  auto equi = generate(RuleKind::kEqui, p, vocab);
  auto ecat = equi.find_category(kCategoryRandom);
  for (const auto& r : equi.records)
    if (r.category == *ecat)
      CHECK(vocab.symbol_class(r.fact.object) == SymbolClass::kAttribute);
}

TEST_CASE("ANTI instance constraints and corpus composition") {
  auto vocab = small_vocab(300, 20, 10, /*anti=*/20);
  GenParams p = desk_params(20, 800, 61);
  auto c = gen_anti(p, vocab);
  CHECK(c.count(Origin::kC, "sym") == 16000);
  CHECK(c.count(Origin::kD, "sym") == 16000);
  CHECK(c.count(Origin::kC, "anti") == 16000);
  CHECK(c.count(Origin::kD, "anti") == 16000);
  for (const auto& [id, inst] : by_instance(c, "anti")) {
    const Fact& cf = inst.c.at(0)->fact;
    const Fact& df = inst.d.at(0)->fact;
    CHECK(cf.object == df.subject);          // (e,r,f), (f,r,g)
    CHECK(cf.subject != df.object);          // e != g
    CHECK(cf.relation == df.relation);
    CHECK(vocab.symbol_class(cf.relation) == SymbolClass::kAntiRelation);
    CHECK(inst.d.at(0)->probe_entity == cf.subject);
  }
}

TEST_CASE("ANTI corpora contain zero symmetric completions of anti facts") {
  auto vocab = small_vocab(50, 8, 10, /*anti=*/8);  // small pool to stress collisions
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    auto c = gen_anti(desk_params(5, 200, seed), vocab);
    auto cat = c.find_category("anti");
    // Exhaustive scan: per anti relation, no ordered pair occurs reversed.
    std::unordered_map<TokenId, std::unordered_set<std::uint64_t>> pairs;
    for (const auto& r : c.records) {
      if (r.category != *cat) continue;
      pairs[r.fact.relation].insert((static_cast<std::uint64_t>(r.fact.subject) << 32) |
                                    static_cast<std::uint32_t>(r.fact.object));
    }
    for (const auto& [rel, set] : pairs)
      for (std::uint64_t pq : set) {
        std::uint64_t rev = (pq << 32) | (pq >> 32);
        CHECK(!set.count(rev));
      }
  }
}

TEST_CASE("INV anti-evidence counts and constraints") {
  auto vocab = small_vocab();
  auto c = gen_inv_antievidence(desk_params(20, 800, 71), vocab);
  CHECK(c.count(Origin::kC) == 48000);  // 16,000 premises + 32,000 evidence facts
  CHECK(c.count(Origin::kD) == 16000);
  CHECK(c.count(Origin::kC, kCategoryEvidence) == 32000);
  auto inv_cat = c.find_category("inv");
  auto ev_cat = c.find_category(kCategoryEvidence);
  std::map<std::int64_t, std::vector<const FactRecord*>> evidence;
  std::map<std::int64_t, InstanceView> instances;
  for (const auto& r : c.records) {
    if (r.category == *ev_cat)
      evidence[r.instance].push_back(&r);
    else if (r.category == *inv_cat)
      (r.origin == Origin::kC ? instances[r.instance].c : instances[r.instance].d).push_back(&r);
  }
  for (const auto& [id, inst] : instances) {
    const Fact& cf = inst.c.at(0)->fact;  // (e, r, f)
    const Fact& df = inst.d.at(0)->fact;  // (f, s, e)
    const auto& ev = evidence.at(id);
    REQUIRE(ev.size() == 2);  // exactly two non-symmetry-evidence facts
    const Fact& e1 = ev[0]->fact;
    const Fact& e2 = ev[1]->fact;
    CHECK(e1.subject == cf.subject);
    CHECK(e1.relation == cf.relation);
    CHECK(e1.object != cf.object);  // fresh object
    CHECK(e2.subject == df.subject);
    CHECK(e2.relation == df.relation);
    CHECK(e2.object != df.object);
  }
}

TEST_CASE("COMP-enhanced cross products, samegroup pairs and path closure") {
  auto vocab = small_vocab(200, 10, 4);
  GenParams p = desk_params(1, 1, 81);
  p.group_size = 10;
  auto c = gen_comp_enhanced(p, vocab);
  CHECK(c.count(Origin::kC, "comp") == 200);           // 100 r-facts + 100 s-facts
  CHECK(c.count(Origin::kD, "comp") == 100);           // 100 t-facts
  CHECK(c.count(Origin::kC, kCategorySamegroup) == 3 * 90);  // ordered pairs, m != n

  auto c_facts = fact_set(c, Origin::kC);
  for (const auto& r : c.records) {
    if (r.origin != Origin::kD) continue;
    // Path existence: some e2 with (e1, r, e2) and (e2, s, e3) in C.
    bool found = false;
    for (const auto& rc : c.records) {
      if (rc.origin != Origin::kC || rc.fact.subject != r.fact.subject) continue;
      if (rc.fact.relation == Vocabulary::kSamegroup) continue;
      for (const auto& rc2 : c.records)
        if (rc2.origin == Origin::kC && rc2.fact.subject == rc.fact.object &&
            rc2.fact.object == r.fact.object && rc2.fact.relation != Vocabulary::kSamegroup)
          found = true;
      if (found) break;
    }
    CHECK(found);
  }
}

TEST_CASE("COMP-enhanced with groups of 4 gives 16 facts per relation") {
  auto vocab = small_vocab(100, 10, 4);
  GenParams p = desk_params(1, 1, 5);
  p.group_size = 4;
  auto c = gen_comp_enhanced(p, vocab);
  CHECK(c.count(Origin::kC, "comp") == 32);  // 16 r-facts + 16 s-facts
  CHECK(c.count(Origin::kD, "comp") == 16);
}

TEST_CASE("FREQ bucket structure and emission counts") {
  auto vocab = small_vocab(500, 20, 2);
  GenParams p = desk_params(1000, 1, 91);
  p.freq_max = 10;  // 100 facts per bucket
  auto c = gen_freq(p, vocab);
  REQUIRE(c.records.size() == 1000);
  // Bucket label equals the emission count for every fact.
  std::map<std::string, std::int64_t> per_bucket;
  for (const auto& r : c.records) {
    auto name = c.category_name(r.category);
    CHECK(name == freq_bucket_category(r.multiplicity));
    per_bucket[name] += 1;
  }
  CHECK(per_bucket.size() == 10);
  for (const auto& [name, n] : per_bucket) CHECK(n == 100);
  CHECK(c.emission_count() == 100 * (10 * 11 / 2));

  // Distinctness of the sampled facts.
  auto facts = fact_set(c, Origin::kC);
  CHECK(facts.size() == 1000);
}

TEST_CASE("FREQ unit-bucket example: one fact per bucket") {
  auto vocab = small_vocab(500, 20, 2);
  GenParams p = desk_params(100, 1, 3);
  p.freq_max = 100;
  auto c = gen_freq(p, vocab);
  CHECK(c.records.size() == 100);
  CHECK(c.emission_count() == 5050);
  for (std::size_t i = 0; i < c.records.size(); ++i)
    CHECK(c.records[i].multiplicity == static_cast<std::int32_t>(i + 1));
}

TEST_CASE("FREQ emission multiplicity survives the corpus file") {
  testing::TmpDir dir("freq");
  auto vocab = small_vocab(500, 20, 2);
  GenParams p = desk_params(60, 1, 13);
  p.freq_max = 6;
  auto c = gen_freq(p, vocab);
  auto split = split_train_test(c, 0.1, 1);
  write_corpus_dir(dir.path(), vocab, c, split, p.seed);
  std::unordered_map<std::string, std::int64_t> line_counts;
  for (const auto& line : read_lines(dir / "corpus.txt")) ++line_counts[line];
  for (const auto& r : c.records)
    CHECK(line_counts.at(vocab.render(r.fact)) == r.multiplicity);
}

TEST_CASE("SCHEMA categories partition the corpus; exception copies multiply") {
  auto vocab = small_vocab(600, 10, 60);
  GenParams p;
  p.k = 10;
  p.group_size = 30;
  p.schema_attrs = 10;
  p.seed = 101;
  SUBCASE("base experiment") {
    p.exception_copies = 1;
    auto c = gen_schema(p, vocab);
    for (const auto& r : c.records) {
      auto name = c.category_name(r.category);
      bool known = name == kCategoryGroupAttribute || name == kCategoryException ||
                   name == kCategoryUniqueAttribute;
      CHECK(known);
      CHECK(r.multiplicity == 1);
    }
    CHECK(c.count(Origin::kC, kCategoryGroupAttribute) > 0);
    CHECK(c.count(Origin::kC, kCategoryException) > 0);
    CHECK(c.count(Origin::kC, kCategoryUniqueAttribute) > 0);
  }
  SUBCASE("frequent exceptions") {
    p.exception_copies = 10;
    auto c = gen_schema(p, vocab);
    auto exception_cat = c.find_category(kCategoryException);
    for (const auto& r : c.records)
      CHECK(r.multiplicity == (r.category == *exception_cat ? 10 : 1));
  }
}

TEST_CASE("SCHEMA group-attribute expectation matches the branch probabilities") {
  auto vocab = small_vocab(4000, 10, 60);
  double mean_sum = 0.0;
  std::int64_t pairs = 0;
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    GenParams p;
    p.k = 12;
    p.group_size = 50;
    p.schema_attrs = 10;
    p.seed = seed;
    auto c = gen_schema(p, vocab);
    // Count group-attribute facts per (group, relation) pair that took the
    // schema branch.
    std::map<std::pair<std::int64_t, TokenId>, std::int64_t> per_pair;
    auto cat = c.find_category(kCategoryGroupAttribute);
    for (const auto& r : c.records)
      if (r.category == *cat) per_pair[{r.instance, r.fact.relation}] += 1;
    for (const auto& [key, count] : per_pair) {
      mean_sum += static_cast<double>(count);
      ++pairs;
    }
  }
  double mean = mean_sum / static_cast<double>(pairs);
  double expected = 50.0 * 10.0 * 0.5;  // group_size * schema_attrs * P(add)
  double sigma = std::sqrt(50.0 * 10.0 * 0.25);
  CHECK(std::fabs(mean - expected) < 3.0 * sigma / std::sqrt(static_cast<double>(pairs)));
}

TEST_CASE("split: 90/10 counts, gold recount oracle, dedup") {
  auto vocab = small_vocab();
  GenParams p = desk_params(20, 800, 111);
  auto corpus = generate(RuleKind::kSym, p, vocab);
  auto split = split_train_test(corpus, 0.10, 7);
  CHECK(split.test.size() + static_cast<std::size_t>(split.dropped_duplicate_queries) == 1600);
  CHECK(split.train_records.size() ==
        corpus.records.size() - 1600);

  // Gold recount by full scan, independent of the split implementation.
  for (std::size_t i = 0; i < split.test.size(); i += 97) {
    const auto& q = split.test[i];
    std::vector<TokenId> gold;
    for (const auto& r : corpus.records)
      if (r.fact.subject == q.fact.subject && r.fact.relation == q.fact.relation &&
          r.fact.negated == q.fact.negated)
        gold.push_back(r.fact.object);
    std::sort(gold.begin(), gold.end());
    gold.erase(std::unique(gold.begin(), gold.end()), gold.end());
    CHECK(q.gold == gold);
  }

  // No test fact appears in train at the string level.
  std::unordered_set<Fact, FactHash> train_facts;
  for (auto id : split.train_records)
    train_facts.insert(corpus.records[static_cast<std::size_t>(id)].fact);
  for (const auto& q : split.test) CHECK(!train_facts.count(q.fact));
}

TEST_CASE("split: duplicate-heavy corpus reports drops") {
  // 2 entities force many self-pairs and duplicates.
  auto vocab = small_vocab(2, 4, 2);
  auto corpus = gen_sym(desk_params(2, 100, 17), vocab);
  auto split = split_train_test(corpus, 0.10, 3);
  CHECK(split.dropped_duplicate_queries > 0);
  std::unordered_set<Fact, FactHash> train_facts;
  for (auto id : split.train_records)
    train_facts.insert(corpus.records[static_cast<std::size_t>(id)].fact);
  for (const auto& q : split.test) CHECK(!train_facts.count(q.fact));
}

TEST_CASE("split: |D|=10 gives a deterministic 9/1 assignment") {
  auto vocab = small_vocab();
  auto corpus = gen_sym(desk_params(1, 10, 23), vocab);
  auto a = split_train_test(corpus, 0.10, 5);
  auto b = split_train_test(corpus, 0.10, 5);
  CHECK(a.test.size() + static_cast<std::size_t>(a.dropped_duplicate_queries) == 1);
  REQUIRE(a.test.size() == b.test.size());
  for (std::size_t i = 0; i < a.test.size(); ++i) CHECK(a.test[i].fact == b.test[i].fact);
}

TEST_CASE("split: holdout bounds and empty-D validation") {
  auto vocab = small_vocab();
  auto corpus = gen_sym(desk_params(1, 5, 1), vocab);
  CHECK_THROWS_AS(split_train_test(corpus, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(split_train_test(corpus, 1.0, 1), ConfigError);
  GeneratedCorpus empty_d;
  empty_d.rule = RuleKind::kSym;
  empty_d.intern_category("sym");
  empty_d.records.push_back({{vocab.entity(0), vocab.relation(0), vocab.entity(1), false},
                             Origin::kC, 0, 0, 1, -1});
  CHECK_THROWS_AS(split_train_test(empty_d, 0.1, 1), ConfigError);
}

TEST_CASE("memorization split: train and test are both C") {
  auto vocab = small_vocab(500, 20, 2);
  GenParams p = desk_params(100, 1, 31);
  p.freq_max = 10;
  auto corpus = gen_freq(p, vocab);
  auto split = split_train_test(corpus, 0.10, 1);
  CHECK(split.train_records.size() == corpus.records.size());
  CHECK(split.test.size() == corpus.records.size());
  CHECK(split.train_eval.size() == corpus.records.size());
  for (const auto& q : split.test) CHECK(q.multiplicity >= 1);
}

TEST_CASE("generation and corpus files are byte-identical across reruns") {
  auto vocab = small_vocab(300, 20, 40, 20, 10);
  for (RuleKind rule : {RuleKind::kEqui, RuleKind::kSym, RuleKind::kInv, RuleKind::kComp,
                        RuleKind::kImp, RuleKind::kNeg, RuleKind::kAnti, RuleKind::kInvAnti,
                        RuleKind::kCompEnhanced, RuleKind::kFreq, RuleKind::kSchema}) {
    GenParams p;
    p.n = 50;
    p.m = 5;
    p.seed = 333;
    p.k = 3;
    p.group_size = rule == RuleKind::kCompEnhanced ? 5 : 20;
    p.freq_max = 10;
    auto a = generate(rule, p, vocab);
    auto b = generate(rule, p, vocab);
    REQUIRE(a.records.size() == b.records.size());
    bool equal = true;
    for (std::size_t i = 0; i < a.records.size(); ++i)
      equal &= a.records[i].fact == b.records[i].fact &&
               a.records[i].origin == b.records[i].origin &&
               a.records[i].multiplicity == b.records[i].multiplicity;
    CHECK(equal);
  }
}

TEST_CASE("written corpus directory round-trips queries and fact lines") {
  testing::TmpDir dir("corpusio");
  auto vocab = small_vocab(100, 10, 20);
  GenParams p = desk_params(3, 40, 41);
  p.num_random_relations = -1;
  auto corpus = generate(RuleKind::kNeg, p, vocab);
  auto split = split_train_test(corpus, 0.10, 2);
  write_corpus_dir(dir.path(), vocab, corpus, split, p.seed);

  auto lines = read_lines(dir / "corpus.txt");
  CHECK(static_cast<std::int64_t>(lines.size()) == corpus.emission_count());
  CHECK(read_lines(dir / "train.txt").size() == split.train_records.size());

  auto vocab2 = Vocabulary::load(dir / "vocab.tsv");
  auto queries = load_queries(dir / "test.jsonl", vocab2);
  REQUIRE(queries.size() == split.test.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    CHECK(queries[i].fact == split.test[i].fact);
    CHECK(queries[i].gold == split.test[i].gold);
    CHECK(queries[i].category == split.test[i].category);
  }
  auto facts = load_fact_lines(dir / "train.txt", vocab2);
  CHECK(facts.size() == split.train_records.size());
}

TEST_CASE("validation rejects unusable parameters") {
  auto vocab = small_vocab();
  GenParams p;
  p.n = 0;
  CHECK_THROWS_AS(gen_sym(p, vocab), ConfigError);
  GenParams freq;
  freq.n = 101;
  freq.freq_max = 100;
  CHECK_THROWS_AS(gen_freq(freq, vocab), ConfigError);
  GenParams anti;
  CHECK_THROWS_AS(gen_anti(anti, vocab), ConfigError);  // no R* pool in vocab
}

TEST_SUITE_END();
