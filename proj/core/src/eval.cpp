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

#include "factlab/eval.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace factlab {

using json = nlohmann::json;

namespace {

// Indices of the top-k candidates by (score desc, id asc); candidates are
// all non-special ids.
void select_top_k(std::span<const float> logits, const Vocabulary& vocab, std::size_t k,
                  std::vector<TokenId>& scratch, std::vector<TokenId>& out) {
  const auto vocab_size = static_cast<TokenId>(vocab.size());
  if (static_cast<std::int64_t>(logits.size()) != vocab.size())
    throw NumericError("ranking: logits length != vocabulary size");
  scratch.clear();
  for (TokenId id = Vocabulary::kNumSpecial; id < vocab_size; ++id) scratch.push_back(id);
  k = std::min(k, scratch.size());
  auto better = [&](TokenId a, TokenId b) {
    float sa = logits[static_cast<std::size_t>(a)], sb = logits[static_cast<std::size_t>(b)];
    if (sa != sb) return sa > sb;
    return a < b;
  };
  std::partial_sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k),
                    scratch.end(), better);
  out.assign(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k));
}

std::array<TokenId, Vocabulary::kMaxSeqLen> encode_masked(const Vocabulary& vocab,
                                                          const Fact& fact) {
  auto ids = vocab.encode(fact);
  ids[fact.negated ? 3 : 2] = Vocabulary::kMask;
  return ids;
}

// Runs the encoder over a batch of masked queries and returns, per query,
// the full-vocabulary logits at the MASK position.
class BatchScorer {
 public:
  BatchScorer(const ModelParams<float>& params, const Vocabulary& vocab, std::int64_t batch_size)
      : params_(params), vocab_(vocab), batch_size_(std::max<std::int64_t>(1, batch_size)) {}

  template <class Queries, class Fn>
  void score(const Queries& queries, Fn&& per_query) const {
    const std::int64_t seq = params_.config.max_seq_len;
    const auto total = static_cast<std::int64_t>(queries.size());
    for (std::int64_t begin = 0; begin < total; begin += batch_size_) {
      std::int64_t count = std::min(batch_size_, total - begin);
      std::vector<std::int32_t> ids(static_cast<std::size_t>(count * seq), Vocabulary::kPad);
      std::vector<std::int32_t> positions(static_cast<std::size_t>(count));
      for (std::int64_t i = 0; i < count; ++i) {
        const Fact& fact = fact_of(queries[static_cast<std::size_t>(begin + i)]);
        auto enc = encode_masked(vocab_, fact);
        std::copy(enc.begin(), enc.end(), ids.begin() + static_cast<std::ptrdiff_t>(i * seq));
        positions[static_cast<std::size_t>(i)] =
            static_cast<std::int32_t>(i * seq + (fact.negated ? 3 : 2));
      }
      auto hidden = encoder_forward<float>(nullptr, params_, ids, count, nullptr);
      auto logits = mlm_logits<float>(nullptr, params_, hidden, positions);
      const std::int64_t v = logits->cols();
      for (std::int64_t i = 0; i < count; ++i)
        per_query(begin + i, std::span<const float>(logits->v.data() + i * v,
                                                    static_cast<std::size_t>(v)));
    }
  }

 private:
  static const Fact& fact_of(const Fact& f) { return f; }
  static const Fact& fact_of(const TestQuery& q) { return q.fact; }

  const ModelParams<float>& params_;
  const Vocabulary& vocab_;
  std::int64_t batch_size_;
};

}  // namespace

std::vector<TokenId> top_candidates(std::span<const float> logits, const Vocabulary& vocab,
                                    std::size_t k) {
  std::vector<TokenId> scratch, out;
  select_top_k(logits, vocab, k, scratch, out);
  return out;
}

double precision_at_m(std::span<const float> logits, const std::vector<TokenId>& gold,
                      const Vocabulary& vocab) {
  if (gold.empty()) throw ConfigError("precision_at_m: empty gold set");
  auto top = top_candidates(logits, vocab, gold.size());
  std::int64_t hits = 0;
  for (TokenId id : top)
    hits += std::binary_search(gold.begin(), gold.end(), id) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

json EvalReport::to_json() const {
  auto stat_json = [](const CategoryStat& s) {
    return json{{"precision_at_m", s.precision()}, {"hits_at_m", s.hit_rate()}, {"count", s.count}};
  };
  json j;
  j["overall"] = stat_json(overall);
  json cats = json::object();
  for (const auto& [name, s] : per_category) cats[name] = stat_json(s);
  j["per_category"] = std::move(cats);
  json rels = json::object();
  for (const auto& [name, s] : per_relation) rels[name] = stat_json(s);
  j["per_relation"] = std::move(rels);
  return j;
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "group,name,metric,value\n";
  auto emit = [&](const std::string& group, const std::string& name, const CategoryStat& s) {
    out << group << ',' << name << ",precision_at_m," << format_double(s.precision()) << '\n';
    out << group << ',' << name << ",hits_at_m," << format_double(s.hit_rate()) << '\n';
    out << group << ',' << name << ",count," << s.count << '\n';
  };
  emit("overall", "all", overall);
  for (const auto& [name, s] : per_category) emit("category", name, s);
  for (const auto& [name, s] : per_relation) emit("relation", name, s);
  return out.str();
}

EvalReport Evaluator::evaluate(std::span<const TestQuery> queries, const EvalOptions& opts) const {
  EvalReport report;
  BatchScorer scorer(*params_, *vocab_, opts.batch_size);
  std::vector<TokenId> scratch, top;
  scorer.score(queries, [&](std::int64_t qi, std::span<const float> logits) {
    const TestQuery& q = queries[static_cast<std::size_t>(qi)];
    if (q.gold.empty()) throw ConfigError("evaluate: query with empty gold set");
    std::size_t k = std::max(q.gold.size(), static_cast<std::size_t>(
                                                opts.per_query_dump ? opts.dump_top_k : 0));
    select_top_k(logits, *vocab_, k, scratch, top);
    std::int64_t hits = 0;
    bool object_hit = false;
    for (std::size_t i = 0; i < std::min(q.gold.size(), top.size()); ++i) {
      hits += std::binary_search(q.gold.begin(), q.gold.end(), top[i]) ? 1 : 0;
      object_hit |= top[i] == q.fact.object;
    }
    double precision = static_cast<double>(hits) / static_cast<double>(q.gold.size());
    auto& cat = report.per_category[q.category];
    cat.precision_sum += precision;
    cat.hit_sum += object_hit ? 1.0 : 0.0;
    cat.count += 1;
    std::string rel = vocab_->surface(q.fact.relation);
    if (q.fact.negated) rel = "not " + rel;
    auto& rstat = report.per_relation[rel];
    rstat.precision_sum += precision;
    rstat.hit_sum += object_hit ? 1.0 : 0.0;
    rstat.count += 1;
    if (opts.per_query_dump) {
      json j;
      j["subject"] = vocab_->surface(q.fact.subject);
      j["relation"] = vocab_->surface(q.fact.relation);
      j["negated"] = q.fact.negated;
      j["object"] = vocab_->surface(q.fact.object);
      json golds = json::array();
      for (TokenId g : q.gold) golds.push_back(vocab_->surface(g));
      j["gold"] = std::move(golds);
      j["category"] = q.category;
      json preds = json::array();
      for (std::size_t i = 0; i < std::min<std::size_t>(top.size(), opts.dump_top_k); ++i)
        preds.push_back(json{{"token", vocab_->surface(top[i])},
                             {"score", logits[static_cast<std::size_t>(top[i])]}});
      j["top_k"] = std::move(preds);
      j["precision_at_m"] = precision;
      *opts.per_query_dump << j.dump() << '\n';
    }
  });
  // The overall mean is the query-weighted mean of the per-category means by
  // construction: it is derived from the same sums.
  for (const auto& [name, s] : report.per_category) {
    report.overall.precision_sum += s.precision_sum;
    report.overall.hit_sum += s.hit_sum;
    report.overall.count += s.count;
  }
  return report;
}

std::vector<std::vector<TokenId>> Evaluator::rank_queries(std::span<const Fact> queries,
                                                          std::size_t k,
                                                          std::int64_t batch_size) const {
  std::vector<std::vector<TokenId>> out(queries.size());
  BatchScorer scorer(*params_, *vocab_, batch_size);
  std::vector<TokenId> scratch;
  scorer.score(queries, [&](std::int64_t qi, std::span<const float> logits) {
    select_top_k(logits, *vocab_, k, scratch, out[static_cast<std::size_t>(qi)]);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Probes
// ---------------------------------------------------------------------------

json ProbeResult::details() const {
  json j;
  j["kind"] = kind;
  j["rate"] = rate;
  j["count"] = count;
  for (const auto& [k, v] : extras) j[k] = v;
  return j;
}

double symmetry_overgen_rate(std::span<const Fact> control_facts,
                             std::span<const TokenId> reversed_top1) {
  if (control_facts.size() != reversed_top1.size())
    throw ConfigError("symmetry_overgen_rate: size mismatch");
  if (control_facts.empty()) throw ConfigError("symmetry_overgen_rate: no control facts");
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < control_facts.size(); ++i)
    hits += reversed_top1[i] == control_facts[i].subject ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(control_facts.size());
}

ProbeResult probe_symmetry_overgen(const ModelParams<float>& params, const Vocabulary& vocab,
                                   std::span<const Fact> control_facts, std::int64_t batch_size) {
  if (control_facts.empty())
    throw ConfigError("symmetry probe: corpus has no random control facts");
  std::vector<Fact> reversed;
  reversed.reserve(control_facts.size());
  for (const Fact& f : control_facts)
    reversed.push_back({f.object, f.relation, f.subject, f.negated});
  Evaluator ev(params, vocab);
  auto ranked = ev.rank_queries(reversed, 1, batch_size);
  std::vector<TokenId> top1(ranked.size());
  for (std::size_t i = 0; i < ranked.size(); ++i) top1[i] = ranked[i].at(0);
  ProbeResult r;
  r.kind = "sym-overgen";
  r.count = static_cast<std::int64_t>(control_facts.size());
  r.rate = symmetry_overgen_rate(control_facts, top1);
  return r;
}

ProbeResult probe_neg_flip(const ModelParams<float>& params, const Vocabulary& vocab,
                           std::span<const TestQuery> star_queries, std::int64_t batch_size) {
  if (star_queries.empty()) throw ConfigError("negation probe: no A* facts in corpus");
  Evaluator ev(params, vocab);
  std::vector<Fact> original, flipped;
  original.reserve(star_queries.size());
  for (const auto& q : star_queries) {
    original.push_back(q.fact);
    Fact f = q.fact;
    f.negated = !f.negated;
    flipped.push_back(f);
  }
  std::size_t max_m = 1;
  for (const auto& q : star_queries) max_m = std::max(max_m, q.gold.size());
  auto orig_top = ev.rank_queries(original, max_m, batch_size);
  auto flip_top = ev.rank_queries(flipped, max_m, batch_size);
  std::int64_t both = 0;
  for (std::size_t i = 0; i < star_queries.size(); ++i) {
    std::size_t m = star_queries[i].gold.size();
    TokenId obj = star_queries[i].fact.object;
    auto contains = [&](const std::vector<TokenId>& top) {
      auto end = top.begin() + static_cast<std::ptrdiff_t>(std::min(m, top.size()));
      return std::find(top.begin(), end, obj) != end;
    };
    both += contains(orig_top[i]) && contains(flip_top[i]) ? 1 : 0;
  }
  ProbeResult r;
  r.kind = "neg-flip";
  r.count = static_cast<std::int64_t>(star_queries.size());
  r.rate = static_cast<double>(both) / static_cast<double>(star_queries.size());
  return r;
}

ProbeResult probe_anti_symmetric_leak(const ModelParams<float>& params, const Vocabulary& vocab,
                                      std::span<const TestQuery> anti_queries,
                                      std::int64_t batch_size) {
  if (anti_queries.empty()) throw ConfigError("anti probe: no anti test queries");
  for (const auto& q : anti_queries)
    if (q.probe_entity < 0)
      throw ConfigError("anti probe: query lacks the premise subject");
  Evaluator ev(params, vocab);
  std::vector<Fact> facts;
  facts.reserve(anti_queries.size());
  std::size_t max_m = 1;
  for (const auto& q : anti_queries) {
    facts.push_back(q.fact);
    max_m = std::max(max_m, q.gold.size());
  }
  auto ranked = ev.rank_queries(facts, max_m, batch_size);
  std::int64_t leaks = 0;
  double precision_sum = 0.0;
  for (std::size_t i = 0; i < anti_queries.size(); ++i) {
    const auto& q = anti_queries[i];
    std::size_t m = q.gold.size();
    auto end = ranked[i].begin() + static_cast<std::ptrdiff_t>(std::min(m, ranked[i].size()));
    leaks += std::find(ranked[i].begin(), end, q.probe_entity) != end ? 1 : 0;
    std::int64_t hits = 0;
    for (auto it = ranked[i].begin(); it != end; ++it)
      hits += std::binary_search(q.gold.begin(), q.gold.end(), *it) ? 1 : 0;
    precision_sum += static_cast<double>(hits) / static_cast<double>(m);
  }
  ProbeResult r;
  r.kind = "anti-leak";
  r.count = static_cast<std::int64_t>(anti_queries.size());
  r.rate = static_cast<double>(leaks) / static_cast<double>(anti_queries.size());
  r.extras["recognition_rate"] = 1.0 - r.rate;
  r.extras["precision_at_m"] = precision_sum / static_cast<double>(anti_queries.size());
  return r;
}

// ---------------------------------------------------------------------------
// Learning curves
// ---------------------------------------------------------------------------

std::vector<std::string> write_learning_curves(const std::filesystem::path& metrics_csv,
                                               const std::filesystem::path& out_dir) {
  auto lines = read_lines(metrics_csv);
  if (lines.empty() || lines[0] != "epoch,step,split,category,metric,value")
    throw IoError("not a factlab metric log: " + metrics_csv.string());

  struct Key {
    std::string split, metric;
    auto operator<=>(const Key&) const = default;
  };
  // (split, metric) -> category -> epoch -> raw value string. Values pass
  // through untouched so curve rows reproduce the log exactly.
  std::map<Key, std::map<std::string, std::map<std::int64_t, std::string>>> tables;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(lines[i]);
    std::string part;
    while (std::getline(ss, part, ',')) f.push_back(part);
    if (f.size() != 6) throw IoError("malformed metric row: " + lines[i]);
    std::int64_t epoch = std::stoll(f[0]);
    tables[{f[2], f[4]}][f[3]][epoch] = f[5];
  }
  if (tables.empty()) throw IoError("metric log has no rows: " + metrics_csv.string());

  // Build everything before touching the file system.
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& [key, by_cat] : tables) {
    std::vector<std::int64_t> epochs;
    for (const auto& [cat, series] : by_cat)
      for (const auto& [e, v] : series) epochs.push_back(e);
    std::sort(epochs.begin(), epochs.end());
    epochs.erase(std::unique(epochs.begin(), epochs.end()), epochs.end());
    std::ostringstream out;
    out << "epoch";
    for (const auto& [cat, series] : by_cat) out << ',' << cat;
    out << '\n';
    for (auto e : epochs) {
      out << e;
      for (const auto& [cat, series] : by_cat) {
        auto it = series.find(e);
        out << ',' << (it == series.end() ? "" : it->second);
      }
      out << '\n';
    }
    files.emplace_back("curve_" + key.split + "_" + key.metric + ".csv", out.str());
  }

  std::filesystem::create_directories(out_dir);
  std::vector<std::string> written;
  for (const auto& [name, content] : files) {
    write_text_file(out_dir / name, content);
    written.push_back(name);
  }
  return written;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("spearman: need >= 2 paired values");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
      i = j + 1;
    }
    return r;
  };
  auto rx = ranks(x), ry = ranks(y);
  double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(rx.size());
  double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(ry.size());
  double cov = 0, vx = 0, vy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    cov += (rx[i] - mx) * (ry[i] - my);
    vx += (rx[i] - mx) * (rx[i] - mx);
    vy += (ry[i] - my) * (ry[i] - my);
  }
  if (vx == 0.0 || vy == 0.0) return 0.0;
  return cov / std::sqrt(vx * vy);
}

}  // namespace factlab
