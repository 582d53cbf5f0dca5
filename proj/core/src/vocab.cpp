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

#include "factlab/vocab.hpp"

#include <charconv>
#include <numeric>
#include <sstream>

#include "factlab/rng.hpp"

namespace factlab {

namespace {

constexpr std::string_view kSpecialSurfaces[] = {"[PAD]", "[MASK]", "not", "samegroup"};

// Single-letter class prefixes keep corpus lines in the e14/r3/a35 style.
char class_prefix(SymbolClass cls) {
  switch (cls) {
    case SymbolClass::kEntity: return 'e';
    case SymbolClass::kRelation: return 'r';
    case SymbolClass::kAntiRelation: return 'v';
    case SymbolClass::kAttribute: return 'a';
    case SymbolClass::kStarAttribute: return 'b';
    default: return '?';
  }
}

std::int64_t parse_int(std::string_view s, std::string_view what) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw IoError("vocab manifest: bad integer for " + std::string(what));
  return v;
}

}  // namespace

Vocabulary Vocabulary::build(const VocabSpec& spec, std::uint64_t seed) {
  if (spec.num_entities < 0 || spec.num_relations < 0 || spec.num_attributes < 0 ||
      spec.num_anti_relations < 0 || spec.num_star_attributes < 0)
    throw ConfigError("vocab: negative pool size");
  if (spec.num_attributes % 2 != 0)
    throw ConfigError("vocab: num_attributes must be even for antonym pairing");

  Vocabulary v;
  v.spec_ = spec;
  v.seed_ = seed;
  v.size_ = kNumSpecial + spec.num_entities + spec.num_relations + spec.num_anti_relations +
            spec.num_attributes + spec.num_star_attributes;

  // Seeded random pairing: shuffle attribute indices, pair consecutive.
  std::vector<std::int64_t> perm(static_cast<std::size_t>(spec.num_attributes));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(perm);
  v.antonym_.assign(perm.size(), 0);
  for (std::size_t i = 0; i + 1 < perm.size(); i += 2) {
    v.antonym_[static_cast<std::size_t>(perm[i])] = v.attribute(perm[i + 1]);
    v.antonym_[static_cast<std::size_t>(perm[i + 1])] = v.attribute(perm[i]);
  }
  v.build_surface_index();
  return v;
}

std::int64_t Vocabulary::class_begin(SymbolClass cls) const {
  std::int64_t b = kNumSpecial;
  if (cls == SymbolClass::kEntity) return b;
  b += spec_.num_entities;
  if (cls == SymbolClass::kRelation) return b;
  b += spec_.num_relations;
  if (cls == SymbolClass::kAntiRelation) return b;
  b += spec_.num_anti_relations;
  if (cls == SymbolClass::kAttribute) return b;
  b += spec_.num_attributes;
  if (cls == SymbolClass::kStarAttribute) return b;
  return 0;  // kSpecial
}

std::int64_t Vocabulary::class_count(SymbolClass cls) const {
  switch (cls) {
    case SymbolClass::kSpecial: return kNumSpecial;
    case SymbolClass::kEntity: return spec_.num_entities;
    case SymbolClass::kRelation: return spec_.num_relations;
    case SymbolClass::kAntiRelation: return spec_.num_anti_relations;
    case SymbolClass::kAttribute: return spec_.num_attributes;
    case SymbolClass::kStarAttribute: return spec_.num_star_attributes;
  }
  return 0;
}

TokenId Vocabulary::id_in(SymbolClass cls, std::int64_t i) const {
  if (i < 0 || i >= class_count(cls)) throw ConfigError("vocab: symbol index out of range");
  return static_cast<TokenId>(class_begin(cls) + i);
}

SymbolClass Vocabulary::symbol_class(TokenId id) const {
  if (!valid(id)) throw ConfigError("vocab: token id out of range");
  for (SymbolClass cls : {SymbolClass::kEntity, SymbolClass::kRelation,
                          SymbolClass::kAntiRelation, SymbolClass::kAttribute,
                          SymbolClass::kStarAttribute}) {
    if (id >= class_begin(cls) && id < class_begin(cls) + class_count(cls)) return cls;
  }
  return SymbolClass::kSpecial;
}

TokenId Vocabulary::antonym(TokenId attribute_id) const {
  if (symbol_class(attribute_id) != SymbolClass::kAttribute)
    throw ConfigError("vocab: antonym of a non-attribute token");
  return antonym_[static_cast<std::size_t>(attribute_id - class_begin(SymbolClass::kAttribute))];
}

std::string Vocabulary::surface(TokenId id) const {
  SymbolClass cls = symbol_class(id);
  if (cls == SymbolClass::kSpecial) return std::string(kSpecialSurfaces[id]);
  return class_prefix(cls) + std::to_string(id - class_begin(cls));
}

std::optional<TokenId> Vocabulary::find(std::string_view s) const {
  auto it = by_surface_.find(std::string(s));
  if (it == by_surface_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::require(std::string_view s) const {
  auto id = find(s);
  if (!id) throw IoError("unknown vocabulary symbol: " + std::string(s));
  return *id;
}

void Vocabulary::build_surface_index() {
  by_surface_.clear();
  by_surface_.reserve(static_cast<std::size_t>(size_));
  for (TokenId id = 0; id < size_; ++id) by_surface_.emplace(surface(id), id);
}

std::array<TokenId, Vocabulary::kMaxSeqLen> Vocabulary::encode(const Fact& fact) const {
  for (TokenId id : {fact.subject, fact.relation, fact.object})
    if (!valid(id)) throw ConfigError("encode_fact: token id outside vocabulary");
  if (fact.negated) return {fact.subject, kNot, fact.relation, fact.object};
  return {fact.subject, fact.relation, fact.object, kPad};
}

Fact Vocabulary::decode(std::span<const TokenId> tokens) const {
  if (tokens.size() < 3) throw IoError("decode: fact shorter than 3 tokens");
  Fact f;
  if (tokens[1] == kNot) {
    if (tokens.size() < 4) throw IoError("decode: negated fact shorter than 4 tokens");
    f = {tokens[0], tokens[2], tokens[3], true};
  } else {
    f = {tokens[0], tokens[1], tokens[2], false};
    if (tokens.size() >= 4 && tokens[3] != kPad)
      throw IoError("decode: trailing token after 3-token fact");
  }
  for (TokenId id : {f.subject, f.relation, f.object})
    if (!valid(id)) throw IoError("decode: token id outside vocabulary");
  return f;
}

std::string Vocabulary::render(const Fact& fact) const {
  std::string out = surface(fact.subject);
  if (fact.negated) out += " not";
  out += ' ';
  out += surface(fact.relation);
  out += ' ';
  out += surface(fact.object);
  return out;
}

Fact Vocabulary::parse_fact(std::string_view line) const {
  auto tok = split_ws(line);
  Fact f;
  if (tok.size() == 3) {
    f = {require(tok[0]), require(tok[1]), require(tok[2]), false};
  } else if (tok.size() == 4 && tok[1] == "not") {
    f = {require(tok[0]), require(tok[2]), require(tok[3]), true};
  } else {
    throw IoError("malformed fact line: " + std::string(line));
  }
  return f;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ostringstream out;
  out << "factlab-vocab v1\n";
  out << "seed " << seed_ << "\n";
  out << "entities " << spec_.num_entities << "\n";
  out << "relations " << spec_.num_relations << "\n";
  out << "anti_relations " << spec_.num_anti_relations << "\n";
  out << "attributes " << spec_.num_attributes << "\n";
  out << "star_attributes " << spec_.num_star_attributes << "\n";
  out << "[symbols]\n";
  for (TokenId id = 0; id < size_; ++id) out << surface(id) << '\t' << id << '\n';
  out << "[antonyms]\n";
  // Each unordered pair once, lower index first.
  for (std::int64_t i = 0; i < spec_.num_attributes; ++i) {
    TokenId a = attribute(i);
    TokenId b = antonym_[static_cast<std::size_t>(i)];
    if (a < b) out << surface(a) << '\t' << surface(b) << '\n';
  }
  write_text_file(path, out.str());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "factlab-vocab v1")
    throw IoError("not a factlab vocab manifest: " + path.string());

  VocabSpec spec;
  std::uint64_t seed = 0;
  std::size_t i = 1;
  for (; i < lines.size() && lines[i] != "[symbols]"; ++i) {
    auto tok = split_ws(lines[i]);
    if (tok.size() != 2) throw IoError("vocab manifest: malformed header line: " + lines[i]);
    if (tok[0] == "seed")
      seed = static_cast<std::uint64_t>(parse_int(tok[1], "seed"));
    else if (tok[0] == "entities")
      spec.num_entities = parse_int(tok[1], "entities");
    else if (tok[0] == "relations")
      spec.num_relations = parse_int(tok[1], "relations");
    else if (tok[0] == "anti_relations")
      spec.num_anti_relations = parse_int(tok[1], "anti_relations");
    else if (tok[0] == "attributes")
      spec.num_attributes = parse_int(tok[1], "attributes");
    else if (tok[0] == "star_attributes")
      spec.num_star_attributes = parse_int(tok[1], "star_attributes");
    else
      throw IoError("vocab manifest: unknown header field: " + lines[i]);
  }
  if (i >= lines.size()) throw IoError("vocab manifest: missing [symbols] section");

  // Construction is a pure function of (spec, seed); the symbol and antonym
  // sections are cross-checked against the rebuilt table.
  Vocabulary v = build(spec, seed);
  std::size_t symbol_count = 0;
  bool in_antonyms = false;
  for (++i; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    if (lines[i] == "[antonyms]") {
      in_antonyms = true;
      continue;
    }
    auto tok = split_ws(lines[i]);
    if (tok.size() != 2) throw IoError("vocab manifest: malformed line: " + lines[i]);
    if (!in_antonyms) {
      TokenId id = static_cast<TokenId>(parse_int(tok[1], "token id"));
      if (!v.valid(id) || v.surface(id) != tok[0])
        throw IoError("vocab manifest: symbol table mismatch at: " + lines[i]);
      ++symbol_count;
    } else {
      TokenId a = v.require(tok[0]);
      TokenId b = v.require(tok[1]);
      if (v.antonym(a) != b)
        throw IoError("vocab manifest: antonym map mismatch at: " + lines[i]);
    }
  }
  if (symbol_count != static_cast<std::size_t>(v.size_))
    throw IoError("vocab manifest: symbol count mismatch");
  return v;
}

}  // namespace factlab
