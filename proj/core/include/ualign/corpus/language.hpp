#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ualign/corpus/vocab.hpp"
#include "ualign/numerics/matrix.hpp"

namespace ualign {

struct LanguageOptions {
  std::size_t in_dim = 16;
  int frames_min = 2;
  int frames_max = 5;
  double noise_sigma = 0.1;
  int entity_set_size = 6;
  int synonym_pairs = 8;
  double max_prototype_cosine = 0.9;
};

// The synthetic language: one acoustic prototype per token plus the rules
// that define each task's target.
struct LanguageSpec {
  std::uint64_t seed = 0;
  LanguageOptions options;
  Matrix prototypes;                            // 64 x in_dim, unit rows
  std::vector<int> intent_triggers;             // class c -> trigger token
  std::vector<std::vector<int>> entity_sets;    // PER, LOC, ORG token sets
  std::vector<int> synonym_map;                 // size 64, involution

  // -1 when the token is not a trigger / not in any entity set.
  int intent_of(int token) const;
  int entity_class_of(int token) const;
  bool is_plain(int token) const;   // not a trigger, entity or synonym token

  std::string to_json() const;
  static LanguageSpec from_json(const std::string& text);
  std::string digest() const;
};

LanguageSpec language_init(std::uint64_t seed, const LanguageOptions& options = {});

}  // namespace ualign
