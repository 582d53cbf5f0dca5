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

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "factlab/rng.hpp"

namespace factlab {

using json = nlohmann::json;

namespace {

constexpr int kResampleLimit = 100000;

// Relation ids are split into a rule half (front) and a control half (back),
// so control relation ids are always disjoint from rule relation ids.
std::int64_t rule_pool_size(const VocabSpec& s) { return (s.num_relations + 1) / 2; }

struct Sampler {
  const Vocabulary& vocab;
  Rng& rng;

  TokenId entity() { return vocab.entity(rng.index(vocab.spec().num_entities)); }
  TokenId attribute() { return vocab.attribute(rng.index(vocab.spec().num_attributes)); }
  TokenId star_attribute() {
    return vocab.star_attribute(rng.index(vocab.spec().num_star_attributes));
  }
  TokenId rule_relation() { return vocab.relation(rng.index(rule_pool_size(vocab.spec()))); }
  TokenId control_relation() {
    std::int64_t pool = vocab.spec().num_relations - rule_pool_size(vocab.spec());
    return vocab.relation(rule_pool_size(vocab.spec()) + rng.index(pool));
  }
  TokenId any_relation() { return vocab.relation(rng.index(vocab.spec().num_relations)); }
  TokenId anti_relation() {
    return vocab.anti_relation(rng.index(vocab.spec().num_anti_relations));
  }
};

void require(bool cond, const char* msg) {
  if (!cond) throw ConfigError(msg);
}

std::uint64_t pack_pair(TokenId a, TokenId b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

std::uint64_t pack_query(const Fact& f) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(f.subject)) << 33) |
         (static_cast<std::uint64_t>(static_cast<std::uint32_t>(f.relation)) << 1) |
         (f.negated ? 1u : 0u);
}

}  // namespace

std::string_view rule_name(RuleKind rule) {
  switch (rule) {
    case RuleKind::kEqui: return "equi";
    case RuleKind::kSym: return "sym";
    case RuleKind::kInv: return "inv";
    case RuleKind::kComp: return "comp";
    case RuleKind::kImp: return "imp";
    case RuleKind::kNeg: return "neg";
    case RuleKind::kAnti: return "anti";
    case RuleKind::kInvAnti: return "inv-anti";
    case RuleKind::kCompEnhanced: return "comp-enhanced";
    case RuleKind::kFreq: return "freq";
    case RuleKind::kSchema: return "schema";
  }
  return "?";
}

std::optional<RuleKind> parse_rule(std::string_view name) {
  for (RuleKind r : {RuleKind::kEqui, RuleKind::kSym, RuleKind::kInv, RuleKind::kComp,
                     RuleKind::kImp, RuleKind::kNeg, RuleKind::kAnti, RuleKind::kInvAnti,
                     RuleKind::kCompEnhanced, RuleKind::kFreq, RuleKind::kSchema}) {
    if (rule_name(r) == name) return r;
  }
  return std::nullopt;
}

bool is_memorization_rule(RuleKind rule) {
  return rule == RuleKind::kFreq || rule == RuleKind::kSchema;
}

std::string freq_bucket_category(std::int64_t bucket) {
  return "freq_" + std::to_string(bucket);
}

std::int32_t GeneratedCorpus::intern_category(std::string_view name) {
  for (std::size_t i = 0; i < categories.size(); ++i)
    if (categories[i] == name) return static_cast<std::int32_t>(i);
  categories.emplace_back(name);
  return static_cast<std::int32_t>(categories.size() - 1);
}

std::optional<std::int32_t> GeneratedCorpus::find_category(std::string_view name) const {
  for (std::size_t i = 0; i < categories.size(); ++i)
    if (categories[i] == name) return static_cast<std::int32_t>(i);
  return std::nullopt;
}

std::int64_t GeneratedCorpus::count(Origin origin) const {
  std::int64_t c = 0;
  for (const auto& r : records) c += (r.origin == origin);
  return c;
}

std::int64_t GeneratedCorpus::count(Origin origin, std::string_view category) const {
  auto id = find_category(category);
  if (!id) return 0;
  std::int64_t c = 0;
  for (const auto& r : records) c += (r.origin == origin && r.category == *id);
  return c;
}

std::int64_t GeneratedCorpus::emission_count() const {
  std::int64_t c = 0;
  for (const auto& r : records) c += r.multiplicity;
  return c;
}

void GenParams::validate(RuleKind rule, const VocabSpec& vocab) const {
  require(n >= 1, "gen: n must be >= 1");
  require(vocab.num_entities >= 1, "gen: vocabulary has no entities");
  bool control = num_random_relations != 0 && !is_memorization_rule(rule);
  switch (rule) {
    case RuleKind::kFreq:
      require(freq_max >= 1, "gen: freq_max must be >= 1");
      require(n % freq_max == 0, "gen: n must be divisible by freq_max");
      require(vocab.num_relations >= 1, "gen: vocabulary has no relations");
      break;
    case RuleKind::kSchema:
      require(k >= 1, "gen: k must be >= 1");
      require(group_size >= 1, "gen: group_size must be >= 1");
      require(schema_attrs >= 1, "gen: schema_attrs must be >= 1");
      require(exception_copies >= 1, "gen: exception_copies must be >= 1");
      require(vocab.num_relations >= 1, "gen: vocabulary has no relations");
      require(vocab.num_attributes >= 1, "gen: vocabulary has no attributes");
      require(vocab.num_entities >= group_size, "gen: fewer entities than group_size");
      break;
    case RuleKind::kCompEnhanced:
      require(group_size >= 1, "gen: group_size must be >= 1");
      require(vocab.num_entities >= 3 * group_size,
              "gen: fewer entities than 3 * group_size");
      require(rule_pool_size(vocab) >= 1, "gen: empty rule relation pool");
      break;
    default:
      require(m >= 1, "gen: m must be >= 1");
      require(rule_pool_size(vocab) >= 1, "gen: empty rule relation pool");
      break;
  }
  if (rule == RuleKind::kImp) {
    require(l >= 1, "gen: l must be >= 1");
    require(implied_per_premise >= 1, "gen: implied_per_premise must be >= 1");
  }
  if (rule == RuleKind::kEqui || rule == RuleKind::kImp || rule == RuleKind::kNeg)
    require(vocab.num_attributes >= 2, "gen: attribute pool too small");
  if (rule == RuleKind::kAnti) {
    require(vocab.num_anti_relations >= 1, "gen: vocabulary has no anti relations");
    require(vocab.num_entities >= 3, "gen: ANTI needs at least 3 entities");
  }
  if (control)
    require(vocab.num_relations - rule_pool_size(vocab) >= 1,
            "gen: empty control relation pool");
}

// ---------------------------------------------------------------------------
// Symbolic-rule generators (one subcorpus of instances per outer iteration)
// ---------------------------------------------------------------------------

GeneratedCorpus gen_equi(const GenParams& p, const Vocabulary& vocab) {
  p.validate(RuleKind::kEqui, vocab.spec());
  GeneratedCorpus out;
  out.rule = RuleKind::kEqui;
  std::int32_t cat = out.intern_category(rule_name(RuleKind::kEqui));
  Rng rng(p.seed);
  Sampler s{vocab, rng};
  std::int64_t inst = 0;
  for (std::int64_t i = 0; i < p.n; ++i) {
    TokenId r = s.rule_relation();
    TokenId t = s.rule_relation();
    TokenId a = s.attribute();
    for (std::int64_t j = 0; j < p.m; ++j) {
      TokenId e = s.entity();
      bool add_c = rng.bernoulli(0.5);
      Fact first{e, add_c ? r : t, a, false};
      Fact second{e, add_c ? t : r, a, false};
      out.records.push_back({first, Origin::kC, cat, inst, 1, -1});
      out.records.push_back({second, Origin::kD, cat, inst, 1, -1});
      ++inst;
    }
  }
  return out;
}

GeneratedCorpus gen_sym(const GenParams& p, const Vocabulary& vocab) {
  p.validate(RuleKind::kSym, vocab.spec());
  GeneratedCorpus out;
  out.rule = RuleKind::kSym;
  std::int32_t cat = out.intern_category(rule_name(RuleKind::kSym));
  Rng rng(p.seed);
  Sampler s{vocab, rng};
  std::int64_t inst = 0;
  for (std::int64_t i = 0; i < p.n; ++i) {
    TokenId r = s.rule_relation();
    for (std::int64_t j = 0; j < p.m; ++j) {
      TokenId e = s.entity();
      TokenId f = s.entity();
      out.records.push_back({{e, r, f, false}, Origin::kC, cat, inst, 1, -1});
      out.records.push_back({{f, r, e, false}, Origin::kD, cat, inst, 1, -1});
      ++inst;
    }
  }
  return out;
}

GeneratedCorpus gen_inv(const GenParams& p, const Vocabulary& vocab) {
  p.validate(RuleKind::kInv, vocab.spec());
  GeneratedCorpus out;
  out.rule = RuleKind::kInv;
  std::int32_t cat = out.intern_category(rule_name(RuleKind::kInv));
  Rng rng(p.seed);
  Sampler s{vocab, rng};
  std::int64_t inst = 0;
  for (std::int64_t i = 0; i < p.n; ++i) {
    TokenId r = s.rule_relation();
    TokenId t = s.rule_relation();
    for (std::int64_t j = 0; j < p.m; ++j) {
      TokenId e = s.entity();
      TokenId f = s.entity();
      out.records.push_back({{e, r, f, false}, Origin::kC, cat, inst, 1, -1});
      out.records.push_back({{f, t, e, false}, Origin::kD, cat, inst, 1, -1});
      ++inst;
    }
  }
  return out;
}

GeneratedCorpus gen_comp(const GenParams& p, const Vocabulary& vocab) {
  p.validate(RuleKind::kComp, vocab.spec());
  GeneratedCorpus out;
  out.rule = RuleKind::kComp;
  std::int32_t cat = out.intern_category(rule_name(RuleKind::kComp));
  Rng rng(p.seed);
  Sampler s{vocab, rng};
  std::int64_t inst = 0;
  for (std::int64_t i = 0; i < p.n; ++i) {
    TokenId r = s.rule_relation();
    TokenId t = s.rule_relation();
    TokenId u = s.rule_relation();
    for (std::int64_t j = 0; j < p.m; ++j) {
      TokenId e = s.entity();
      TokenId f = s.entity();
      TokenId g = s.entity();
      out.records.push_back({{e, r, f, false}, Origin::kC, cat, inst, 1, -1});
      out.records.push_back({{f, t, g, false}, Origin::kC, cat, inst, 1, -1});
      out.records.push_back({{e, u, g, false}, Origin::kD, cat, inst, 1, -1});
      ++inst;
    }
  }
  return out;
}

GeneratedCorpus gen_imp(const GenParams& p, const Vocabulary& vocab) {
  p.validate(RuleKind::kImp, vocab.spec());
  GeneratedCorpus out;
  out.rule = RuleKind::kImp;
  std::int32_t cat = out.intern_category(rule_name(RuleKind::kImp));
  Rng rng(p.seed);
  Sampler s{vocab, rng};
  std::int64_t inst = 0;
  for (std::int64_t i = 0; i < p.n; ++i) {
    TokenId r = s.rule_relation();
    TokenId t = s.rule_relation();
    for (std::int64_t kk = 0; kk < p.l; ++kk) {
      TokenId premise_attr = s.attribute();
      std::vector<TokenId> implied(static_cast<std::size_t>(p.implied_per_premise));
      for (auto& a : implied) a = s.attribute();
      for (std::int64_t j = 0; j < p.m; ++j) {
        TokenId e = s.entity();
        out.records.push_back({{e, r, premise_attr, false}, Origin::kC, cat, inst, 1, -1});
        for (TokenId a : implied)
          out.records.push_back({{e, t, a, false}, Origin::kD, cat, inst, 1, -1});
        ++inst;
      }
    }
  }
  return out;
}

GeneratedCorpus gen_neg(const GenParams& p, const Vocabulary& vocab) {
  p.validate(RuleKind::kNeg, vocab.spec());
  GeneratedCorpus out;
  out.rule = RuleKind::kNeg;
  std::int32_t cat = out.intern_category(rule_name(RuleKind::kNeg));
  Rng rng(p.seed);
  Sampler s{vocab, rng};
  std::int64_t inst = 0;
  // With contradiction-free sampling, each (relation, entity) pair is used
  // at most once, so (e,r,a) can never coexist with (e, not r, a).
  std::unordered_set<std::uint64_t> used_pairs;
  for (std::int64_t i = 0; i < p.n; ++i) {
    TokenId r = s.rule_relation();
    for (std::int64_t j = 0; j < p.m; ++j) {
      TokenId e = s.entity();
      if (p.contradiction_free_neg) {
        int tries = 0;
        while (!used_pairs.insert(pack_pair(r, e)).second) {
          e = s.entity();
          if (++tries > kResampleLimit)
            throw ConfigError("gen neg: cannot sample contradiction-free entity");
        }
      }
      TokenId a = s.attribute();
      TokenId b = vocab.antonym(a);
      bool negated = rng.bernoulli(0.5);
      Fact c_fact{e, r, a, negated};
      Fact d_fact{e, r, b, !negated};
      out.records.push_back({c_fact, Origin::kC, cat, inst, 1, -1});
      out.records.push_back({d_fact, Origin::kD, cat, inst, 1, -1});
      ++inst;
    }
  }
  // Random A* facts, half of them negated; the negation probe flips these.
  if (vocab.spec().num_star_attributes > 0) {
    std::int64_t count = p.star_facts >= 0 ? p.star_facts : p.n * p.m;
    std::int32_t star_cat = out.intern_category(kCategoryStar);
    for (std::int64_t i = 0; i < count; ++i) {
      TokenId e = s.entity();
      TokenId r = s.rule_relation();
      TokenId a = s.star_attribute();
      bool negated = rng.bernoulli(0.5);
      out.records.push_back({{e, r, a, negated}, Origin::kC, star_cat, -1, 1, -1});
    }
  }
  return out;
}

GeneratedCorpus gen_anti(const GenParams& p, const Vocabulary& vocab) {
  p.validate(RuleKind::kAnti, vocab.spec());
  // The corpus is composed of symmetric, anti-symmetric and random facts;
  // the random portion is appended by generate().
  GeneratedCorpus out = gen_sym(p, vocab);
  out.rule = RuleKind::kAnti;
  std::int32_t cat = out.intern_category("anti");
  Rng rng(p.seed + 0x616e7469u);  // separate stream for the anti portion
  Sampler s{vocab, rng};
  std::int64_t inst = static_cast<std::int64_t>(out.records.size());
  // Ordered (subject, object) pairs per anti relation. A candidate instance
  // is rejected whenever it would put a pair and its mirror image into the
  // corpus: anti relations must never show symmetry evidence.
  std::unordered_map<TokenId, std::unordered_set<std::uint64_t>> pairs_by_rel;
  for (std::int64_t i = 0; i < p.n; ++i) {
    TokenId r = s.anti_relation();
    auto& pairs = pairs_by_rel[r];
    for (std::int64_t j = 0; j < p.m; ++j) {
      TokenId e, f, g;
      int tries = 0;
      for (;;) {
        e = s.entity();
        f = s.entity();
        g = s.entity();
        bool distinct = e != g && e != f && f != g;
        if (distinct && !pairs.count(pack_pair(f, e)) && !pairs.count(pack_pair(g, f)))
          break;
        if (++tries > kResampleLimit)
          throw ConfigError("gen anti: cannot sample non-symmetric instance");
      }
      pairs.insert(pack_pair(e, f));
      pairs.insert(pack_pair(f, g));
      out.records.push_back({{e, r, f, false}, Origin::kC, cat, inst, 1, -1});
      out.records.push_back({{f, r, g, false}, Origin::kD, cat, inst, 1, e});
      ++inst;
    }
  }
  return out;
}

GeneratedCorpus gen_inv_antievidence(const GenParams& p, const Vocabulary& vocab) {
  GeneratedCorpus out;
  out.rule = RuleKind::kInvAnti;
  std::int32_t cat = out.intern_category(rule_name(RuleKind::kInv));
  std::int32_t evidence_cat = out.intern_category(kCategoryEvidence);
  p.validate(RuleKind::kInvAnti, vocab.spec());
  Rng rng(p.seed);
  Sampler s{vocab, rng};
  std::int64_t inst = 0;
  for (std::int64_t i = 0; i < p.n; ++i) {
    TokenId r = s.rule_relation();
    TokenId t = s.rule_relation();
    for (std::int64_t j = 0; j < p.m; ++j) {
      TokenId e = s.entity();
      TokenId f = s.entity();
      out.records.push_back({{e, r, f, false}, Origin::kC, cat, inst, 1, -1});
      out.records.push_back({{f, t, e, false}, Origin::kD, cat, inst, 1, -1});
      // Two non-symmetry-evidence facts: reuse each fact's subject slot with
      // a fresh object.
      TokenId g = s.entity();
      int tries = 0;
      while (g == f) {
        g = s.entity();
        if (++tries > kResampleLimit) throw ConfigError("gen inv-anti: resample failed");
      }
      TokenId h = s.entity();
      tries = 0;
      while (h == e) {
        h = s.entity();
        if (++tries > kResampleLimit) throw ConfigError("gen inv-anti: resample failed");
      }
      out.records.push_back({{e, r, g, false}, Origin::kC, evidence_cat, inst, 1, -1});
      out.records.push_back({{f, t, h, false}, Origin::kC, evidence_cat, inst, 1, -1});
      ++inst;
    }
  }
  return out;
}

GeneratedCorpus gen_comp_enhanced(const GenParams& p, const Vocabulary& vocab) {
  p.validate(RuleKind::kCompEnhanced, vocab.spec());
  GeneratedCorpus out;
  out.rule = RuleKind::kCompEnhanced;
  std::int32_t cat = out.intern_category(rule_name(RuleKind::kComp));
  std::int32_t group_cat = out.intern_category(kCategorySamegroup);
  Rng rng(p.seed);
  Sampler s{vocab, rng};
  std::int64_t gs = p.group_size;
  for (std::int64_t i = 0; i < p.n; ++i) {
    TokenId r = s.rule_relation();
    TokenId t = s.rule_relation();
    TokenId u = s.rule_relation();
    // Three disjoint entity groups per instance.
    auto ids = rng.sample_distinct(vocab.spec().num_entities, 3 * gs);
    std::vector<TokenId> g1, g2, g3;
    for (std::int64_t x = 0; x < gs; ++x) {
      g1.push_back(vocab.entity(ids[static_cast<std::size_t>(x)]));
      g2.push_back(vocab.entity(ids[static_cast<std::size_t>(gs + x)]));
      g3.push_back(vocab.entity(ids[static_cast<std::size_t>(2 * gs + x)]));
    }
    // Group membership facts: all ordered within-group pairs.
    for (const auto& group : {g1, g2, g3})
      for (TokenId a : group)
        for (TokenId b : group)
          if (a != b)
            out.records.push_back(
                {{a, Vocabulary::kSamegroup, b, false}, Origin::kC, group_cat, i, 1, -1});
    for (TokenId e1 : g1)
      for (TokenId e2 : g2)
        out.records.push_back({{e1, r, e2, false}, Origin::kC, cat, i, 1, -1});
    for (TokenId e2 : g2)
      for (TokenId e3 : g3)
        out.records.push_back({{e2, t, e3, false}, Origin::kC, cat, i, 1, -1});
    for (TokenId e1 : g1)
      for (TokenId e3 : g3)
        out.records.push_back({{e1, u, e3, false}, Origin::kD, cat, i, 1, -1});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Memorization generators; C is both training set and test set.
// ---------------------------------------------------------------------------

GeneratedCorpus gen_freq(const GenParams& p, const Vocabulary& vocab) {
  p.validate(RuleKind::kFreq, vocab.spec());
  GeneratedCorpus out;
  out.rule = RuleKind::kFreq;
  Rng rng(p.seed);
  Sampler s{vocab, rng};
  std::int64_t group = p.n / p.freq_max;
  std::vector<std::int32_t> bucket_cat(static_cast<std::size_t>(p.freq_max) + 1, -1);
  std::unordered_set<Fact, FactHash> seen;
  seen.reserve(static_cast<std::size_t>(p.n) * 2);
  for (std::int64_t i = 1; i <= p.n; ++i) {
    Fact f;
    int tries = 0;
    do {
      TokenId e = s.entity();
      TokenId g = s.entity();
      TokenId r = s.any_relation();
      f = {e, r, g, false};
      if (++tries > kResampleLimit)
        throw ConfigError("gen freq: cannot sample enough distinct facts");
    } while (!seen.insert(f).second);
    std::int64_t bucket = 1 + (i - 1) / group;
    auto& cat = bucket_cat[static_cast<std::size_t>(bucket)];
    if (cat < 0) cat = out.intern_category(freq_bucket_category(bucket));
    out.records.push_back({f, Origin::kC, cat, -1, static_cast<std::int32_t>(bucket), -1});
  }
  return out;
}

GeneratedCorpus gen_schema(const GenParams& p, const Vocabulary& vocab) {
  p.validate(RuleKind::kSchema, vocab.spec());
  GeneratedCorpus out;
  out.rule = RuleKind::kSchema;
  std::int32_t group_attr_cat = out.intern_category(kCategoryGroupAttribute);
  std::int32_t exception_cat = out.intern_category(kCategoryException);
  std::int32_t unique_cat = out.intern_category(kCategoryUniqueAttribute);
  Rng rng(p.seed);
  Sampler s{vocab, rng};
  auto copies = static_cast<std::int32_t>(p.exception_copies);
  for (std::int64_t i = 0; i < p.k; ++i) {
    auto idx = rng.sample_distinct(vocab.spec().num_entities, p.group_size);
    std::vector<TokenId> group;
    group.reserve(idx.size());
    for (auto x : idx) group.push_back(vocab.entity(x));
    for (std::int64_t ri = 0; ri < vocab.spec().num_relations; ++ri) {
      TokenId r = vocab.relation(ri);
      if (rng.bernoulli(0.5)) {
        std::vector<TokenId> schema_attrs(static_cast<std::size_t>(p.schema_attrs));
        for (auto& a : schema_attrs) a = s.attribute();
        for (TokenId e : group) {
          for (TokenId a : schema_attrs) {
            if (rng.bernoulli(0.5)) {
              out.records.push_back({{e, r, a, false}, Origin::kC, group_attr_cat, i, 1, -1});
            } else if (rng.bernoulli(0.5)) {
              TokenId b = s.attribute();
              out.records.push_back({{e, r, b, false}, Origin::kC, exception_cat, i, copies, -1});
            }
          }
        }
      } else {
        for (TokenId e : group) {
          if (rng.bernoulli(0.5)) {
            TokenId a = s.attribute();
            out.records.push_back({{e, r, a, false}, Origin::kC, unique_cat, i, 1, -1});
          }
        }
      }
    }
  }
  return out;
}

std::vector<FactRecord> gen_random_control(const GenParams& p, const Vocabulary& vocab,
                                           FactKind kind, std::int32_t category, Rng& rng) {
  Sampler s{vocab, rng};
  std::int64_t relations = p.num_random_relations >= 0 ? p.num_random_relations : p.n;
  std::int64_t per_relation =
      p.random_facts_per_relation >= 0 ? p.random_facts_per_relation : p.m;
  std::vector<FactRecord> out;
  out.reserve(static_cast<std::size_t>(relations * per_relation));
  for (std::int64_t i = 0; i < relations; ++i) {
    TokenId r = s.control_relation();
    for (std::int64_t j = 0; j < per_relation; ++j) {
      TokenId e = s.entity();
      TokenId o = kind == FactKind::kEntity ? s.entity() : s.attribute();
      out.push_back({{e, r, o, false}, Origin::kC, category, -1, 1, -1});
    }
  }
  return out;
}

GeneratedCorpus generate(RuleKind rule, const GenParams& p, const Vocabulary& vocab) {
  GeneratedCorpus out;
  switch (rule) {
    case RuleKind::kEqui: out = gen_equi(p, vocab); break;
    case RuleKind::kSym: out = gen_sym(p, vocab); break;
    case RuleKind::kInv: out = gen_inv(p, vocab); break;
    case RuleKind::kComp: out = gen_comp(p, vocab); break;
    case RuleKind::kImp: out = gen_imp(p, vocab); break;
    case RuleKind::kNeg: out = gen_neg(p, vocab); break;
    case RuleKind::kAnti: out = gen_anti(p, vocab); break;
    case RuleKind::kInvAnti: out = gen_inv_antievidence(p, vocab); break;
    case RuleKind::kCompEnhanced: out = gen_comp_enhanced(p, vocab); break;
    case RuleKind::kFreq: return gen_freq(p, vocab);
    case RuleKind::kSchema: return gen_schema(p, vocab);
  }
  std::int64_t controls = p.num_random_relations != 0 ? 1 : 0;
  if (controls) {
    bool attribute_kind =
        rule == RuleKind::kEqui || rule == RuleKind::kImp || rule == RuleKind::kNeg;
    Rng rng(p.seed + 0x72616e64u);  // separate stream for the control portion
    std::int32_t cat = out.intern_category(kCategoryRandom);
    auto extra = gen_random_control(
        p, vocab, attribute_kind ? FactKind::kAttribute : FactKind::kEntity, cat, rng);
    out.records.insert(out.records.end(), extra.begin(), extra.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Train/test split
// ---------------------------------------------------------------------------

namespace {

std::unordered_map<std::uint64_t, std::vector<TokenId>> build_gold_map(
    const GeneratedCorpus& corpus) {
  std::unordered_map<std::uint64_t, std::vector<TokenId>> gold;
  gold.reserve(corpus.records.size());
  for (const auto& rec : corpus.records) gold[pack_query(rec.fact)].push_back(rec.fact.object);
  for (auto& [key, objs] : gold) {
    std::sort(objs.begin(), objs.end());
    objs.erase(std::unique(objs.begin(), objs.end()), objs.end());
  }
  return gold;
}

TestQuery make_query(const GeneratedCorpus& corpus, const FactRecord& rec,
                     const std::unordered_map<std::uint64_t, std::vector<TokenId>>& gold) {
  TestQuery q;
  q.fact = rec.fact;
  q.gold = gold.at(pack_query(rec.fact));
  q.category = corpus.category_name(rec.category);
  q.instance = rec.instance;
  q.multiplicity = rec.multiplicity;
  q.probe_entity = rec.probe_entity;
  return q;
}

}  // namespace

SplitCorpus split_train_test(const GeneratedCorpus& corpus, double holdout, std::uint64_t seed) {
  if (!(holdout > 0.0 && holdout < 1.0))
    throw ConfigError("split: holdout must be inside (0, 1)");
  auto gold = build_gold_map(corpus);

  SplitCorpus split;
  split.holdout = holdout;

  if (is_memorization_rule(corpus.rule)) {
    // C is both training set and test set.
    split.train_records.resize(corpus.records.size());
    for (std::size_t i = 0; i < corpus.records.size(); ++i)
      split.train_records[i] = static_cast<std::int32_t>(i);
    split.test.reserve(corpus.records.size());
    for (const auto& rec : corpus.records) split.test.push_back(make_query(corpus, rec, gold));
    split.train_eval = split.test;
    return split;
  }

  std::vector<std::int32_t> d_records;
  for (std::size_t i = 0; i < corpus.records.size(); ++i)
    if (corpus.records[i].origin == Origin::kD)
      d_records.push_back(static_cast<std::int32_t>(i));
  if (d_records.empty()) throw ConfigError("split: rule corpus has an empty D set");

  auto holdout_count =
      static_cast<std::size_t>(std::llround(holdout * static_cast<double>(d_records.size())));
  std::vector<std::int32_t> perm = d_records;
  Rng rng(seed);
  rng.shuffle(perm);
  std::unordered_set<std::int32_t> held(perm.begin(),
                                        perm.begin() + static_cast<std::ptrdiff_t>(holdout_count));

  std::unordered_set<Fact, FactHash> train_facts;
  train_facts.reserve(corpus.records.size());
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    auto id = static_cast<std::int32_t>(i);
    if (!held.count(id)) {
      split.train_records.push_back(id);
      train_facts.insert(corpus.records[i].fact);
    }
  }
  // Held-out facts that also occur in training as strings make precision
  // ill-defined; they are dropped here rather than constrained away during
  // generation.
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    auto id = static_cast<std::int32_t>(i);
    if (!held.count(id)) continue;
    if (train_facts.count(corpus.records[i].fact)) {
      ++split.dropped_duplicate_queries;
      continue;
    }
    split.test.push_back(make_query(corpus, corpus.records[i], gold));
  }
  split.train_eval.reserve(split.train_records.size());
  for (auto id : split.train_records)
    split.train_eval.push_back(
        make_query(corpus, corpus.records[static_cast<std::size_t>(id)], gold));
  return split;
}

// ---------------------------------------------------------------------------
// Corpus directory I/O
// ---------------------------------------------------------------------------

namespace {

json query_to_json(const Vocabulary& vocab, const TestQuery& q) {
  json j;
  j["subject"] = vocab.surface(q.fact.subject);
  j["relation"] = vocab.surface(q.fact.relation);
  j["negated"] = q.fact.negated;
  j["object"] = vocab.surface(q.fact.object);
  json golds = json::array();
  for (TokenId g : q.gold) golds.push_back(vocab.surface(g));
  j["gold"] = std::move(golds);
  j["category"] = q.category;
  j["instance"] = q.instance;
  j["multiplicity"] = q.multiplicity;
  if (q.probe_entity >= 0) j["probe_entity"] = vocab.surface(q.probe_entity);
  return j;
}

void write_queries(const std::filesystem::path& path, const Vocabulary& vocab,
                   const std::vector<TestQuery>& queries) {
  std::ostringstream out;
  for (const auto& q : queries) out << query_to_json(vocab, q).dump() << '\n';
  write_text_file(path, out.str());
}

}  // namespace

void write_corpus_dir(const std::filesystem::path& dir, const Vocabulary& vocab,
                      const GeneratedCorpus& corpus, const SplitCorpus& split,
                      std::uint64_t shuffle_seed) {
  std::filesystem::create_directories(dir);
  vocab.save(dir / CorpusFiles::kVocab);

  // Generators emit facts grouped by rule instance; one seeded shuffle of
  // the emission lines decorrelates file order from generation order.
  std::vector<std::int32_t> emissions;
  emissions.reserve(static_cast<std::size_t>(corpus.emission_count()));
  for (std::size_t i = 0; i < corpus.records.size(); ++i)
    for (std::int32_t c = 0; c < corpus.records[i].multiplicity; ++c)
      emissions.push_back(static_cast<std::int32_t>(i));
  Rng rng(shuffle_seed);
  rng.shuffle(emissions);

  std::vector<char> in_train(corpus.records.size(), 0);
  for (auto id : split.train_records) in_train[static_cast<std::size_t>(id)] = 1;

  std::ostringstream corpus_text, train_text, meta_text;
  std::int64_t line = 0;
  for (std::int32_t rec_id : emissions) {
    const auto& rec = corpus.records[static_cast<std::size_t>(rec_id)];
    std::string rendered = vocab.render(rec.fact);
    corpus_text << rendered << '\n';
    if (in_train[static_cast<std::size_t>(rec_id)]) train_text << rendered << '\n';
    json j;
    j["line"] = line;
    j["origin"] = rec.origin == Origin::kC ? "C" : "D";
    j["category"] = corpus.category_name(rec.category);
    j["instance"] = rec.instance;
    j["multiplicity"] = rec.multiplicity;
    j["in_train"] = static_cast<bool>(in_train[static_cast<std::size_t>(rec_id)]);
    meta_text << j.dump() << '\n';
    ++line;
  }
  write_text_file(dir / CorpusFiles::kCorpus, corpus_text.str());
  write_text_file(dir / CorpusFiles::kTrain, train_text.str());
  write_text_file(dir / CorpusFiles::kMeta, meta_text.str());
  write_queries(dir / CorpusFiles::kTest, vocab, split.test);
  write_queries(dir / CorpusFiles::kTrainEval, vocab, split.train_eval);
}

std::vector<TestQuery> load_queries(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::vector<TestQuery> out;
  for (const auto& raw : read_lines(path)) {
    if (raw.empty()) continue;
    json j = json::parse(raw, nullptr, false);
    if (j.is_discarded()) throw IoError("malformed query record in " + path.string());
    TestQuery q;
    q.fact.subject = vocab.require(j.at("subject").get<std::string>());
    q.fact.relation = vocab.require(j.at("relation").get<std::string>());
    q.fact.negated = j.at("negated").get<bool>();
    q.fact.object = vocab.require(j.at("object").get<std::string>());
    for (const auto& g : j.at("gold")) q.gold.push_back(vocab.require(g.get<std::string>()));
    std::sort(q.gold.begin(), q.gold.end());
    q.category = j.at("category").get<std::string>();
    q.instance = j.value("instance", static_cast<std::int64_t>(-1));
    q.multiplicity = j.value("multiplicity", 1);
    if (j.contains("probe_entity"))
      q.probe_entity = vocab.require(j["probe_entity"].get<std::string>());
    if (q.gold.empty()) throw IoError("query with empty gold set in " + path.string());
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<std::array<TokenId, Vocabulary::kMaxSeqLen>> load_fact_lines(
    const std::filesystem::path& path, const Vocabulary& vocab) {
  std::vector<std::array<TokenId, Vocabulary::kMaxSeqLen>> out;
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    out.push_back(vocab.encode(vocab.parse_fact(line)));
  }
  return out;
}

}  // namespace factlab
