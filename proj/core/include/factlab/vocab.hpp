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

#ifndef FACTLAB_VOCAB_HPP_
#define FACTLAB_VOCAB_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "factlab/util.hpp"

namespace factlab {

using TokenId = std::int32_t;

enum class SymbolClass : std::uint8_t {
  kSpecial,
  kEntity,
  kRelation,
  kAntiRelation,  // pool R*, disjoint from R
  kAttribute,
  kStarAttribute,  // pool A*, disjoint from A, no antonym pairing
};

/// Pool sizes of the symbol universe.
struct VocabSpec {
  std::int64_t num_entities = 0;
  std::int64_t num_relations = 0;
  std::int64_t num_attributes = 0;       // must be even (antonym pairing)
  std::int64_t num_anti_relations = 0;   // R*
  std::int64_t num_star_attributes = 0;  // A*

  friend bool operator==(const VocabSpec&, const VocabSpec&) = default;
};

/// A (subject, relation, object) triple, optionally negated. Negation is
/// rendered as a "not" token before the relation and is only produced for
/// attribute facts.
struct Fact {
  TokenId subject = 0;
  TokenId relation = 0;
  TokenId object = 0;
  bool negated = false;

  friend bool operator==(const Fact&, const Fact&) = default;
};

struct FactHash {
  std::size_t operator()(const Fact& f) const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t x) {
      h ^= x;
      h *= 1099511628211ull;
    };
    mix(static_cast<std::uint32_t>(f.subject));
    mix(static_cast<std::uint32_t>(f.relation));
    mix(static_cast<std::uint32_t>(f.object));
    mix(f.negated ? 1u : 0u);
    return static_cast<std::size_t>(h);
  }
};

/// Immutable symbol table: contiguous id ranges per class behind four
/// special tokens, plus a seeded antonym pairing over the attribute pool.
/// Safe for concurrent read access once built.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kMask = 1;
  static constexpr TokenId kNot = 2;
  static constexpr TokenId kSamegroup = 3;
  static constexpr std::int64_t kNumSpecial = 4;
  /// Longest fact rendering: subject, not, relation, object.
  static constexpr int kMaxSeqLen = 4;

  /// Throws ConfigError on negative counts or odd num_attributes.
  static Vocabulary build(const VocabSpec& spec, std::uint64_t seed);

  const VocabSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  std::int64_t size() const { return size_; }

  TokenId entity(std::int64_t i) const { return id_in(SymbolClass::kEntity, i); }
  TokenId relation(std::int64_t i) const { return id_in(SymbolClass::kRelation, i); }
  TokenId anti_relation(std::int64_t i) const { return id_in(SymbolClass::kAntiRelation, i); }
  TokenId attribute(std::int64_t i) const { return id_in(SymbolClass::kAttribute, i); }
  TokenId star_attribute(std::int64_t i) const { return id_in(SymbolClass::kStarAttribute, i); }

  SymbolClass symbol_class(TokenId id) const;
  bool is_special(TokenId id) const { return id >= 0 && id < kNumSpecial; }
  bool valid(TokenId id) const { return id >= 0 && id < size_; }

  /// Involution over the attribute pool; throws on non-attribute ids.
  TokenId antonym(TokenId attribute_id) const;

  std::string surface(TokenId id) const;
  std::optional<TokenId> find(std::string_view surface) const;
  /// find() that throws IoError when the surface form is unknown.
  TokenId require(std::string_view surface) const;

  /// Token rendering "subject [not] relation object", right-padded with
  /// PAD to kMaxSeqLen. Throws ConfigError on ids outside the vocabulary.
  std::array<TokenId, kMaxSeqLen> encode(const Fact& fact) const;
  Fact decode(std::span<const TokenId> tokens) const;

  std::string render(const Fact& fact) const;
  Fact parse_fact(std::string_view line) const;

  /// Manifest file: header with counts and seed, one "surface<TAB>id" line
  /// per symbol, then the antonym map as "a_i<TAB>a_j" pairs.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  Vocabulary() = default;
  TokenId id_in(SymbolClass cls, std::int64_t i) const;
  std::int64_t class_begin(SymbolClass cls) const;
  std::int64_t class_count(SymbolClass cls) const;
  void build_surface_index();

  VocabSpec spec_;
  std::uint64_t seed_ = 0;
  std::int64_t size_ = 0;
  std::vector<TokenId> antonym_;  // attribute index -> attribute id
  std::unordered_map<std::string, TokenId> by_surface_;
};

}  // namespace factlab

#endif  // FACTLAB_VOCAB_HPP_
