#include "ualign/corpus/language.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hex.hpp"
#include "json.hpp"
#include "ualign/numerics/error.hpp"
#include "ualign/numerics/kernels.hpp"
#include "ualign/numerics/rng.hpp"
#include "ualign/numerics/tensor.hpp"

namespace ualign {

using json = nlohmann::ordered_json;

namespace {

void normalise(std::span<double> v) {
  const double n = norm(v);
  for (double& x : v) x /= n;
}

}  // namespace

int LanguageSpec::intent_of(int token) const {
  for (std::size_t c = 0; c < intent_triggers.size(); ++c)
    if (intent_triggers[c] == token) return static_cast<int>(c);
  return -1;
}

int LanguageSpec::entity_class_of(int token) const {
  for (std::size_t c = 0; c < entity_sets.size(); ++c)
    if (std::find(entity_sets[c].begin(), entity_sets[c].end(), token) != entity_sets[c].end())
      return static_cast<int>(c);
  return -1;
}

bool LanguageSpec::is_plain(int token) const {
  return vocab::is_language(token) && intent_of(token) < 0 && entity_class_of(token) < 0 &&
         synonym_map[static_cast<std::size_t>(token)] == token;
}

LanguageSpec language_init(std::uint64_t seed, const LanguageOptions& options) {
  const int roles = vocab::kIntentClasses + vocab::kEntityClasses * options.entity_set_size +
                    2 * options.synonym_pairs;
  if (options.in_dim < 2 || options.frames_min < 1 || options.frames_max < options.frames_min ||
      options.noise_sigma < 0.0 || options.entity_set_size < 1 || options.synonym_pairs < 0 ||
      roles > vocab::kLanguageTokens) {
    throw InvalidArgument("language options are inconsistent");
  }
  LanguageSpec spec;
  spec.seed = seed;
  spec.options = options;
  const Rng root(seed);

  Rng proto_rng = root.split("prototypes");
  spec.prototypes = Matrix(vocab::kLanguageTokens, options.in_dim);
  for (std::size_t r = 0; r < spec.prototypes.rows(); ++r) {
    for (;;) {
      auto row = spec.prototypes.row(r);
      for (double& v : row) v = proto_rng.normal();
      normalise(row);
      bool ok = true;
      for (std::size_t q = 0; q < r && ok; ++q)
        ok = std::abs(dot(row, spec.prototypes.row(q))) < options.max_prototype_cosine;
      if (ok) break;
    }
  }

  Rng role_rng = root.split("roles");
  std::vector<int> order(vocab::kLanguageTokens);
  std::iota(order.begin(), order.end(), 0);
  role_rng.shuffle(order);
  auto next = order.begin();
  spec.intent_triggers.assign(next, next + vocab::kIntentClasses);
  next += vocab::kIntentClasses;
  for (int c = 0; c < vocab::kEntityClasses; ++c) {
    spec.entity_sets.emplace_back(next, next + options.entity_set_size);
    std::sort(spec.entity_sets.back().begin(), spec.entity_sets.back().end());
    next += options.entity_set_size;
  }
  spec.synonym_map.resize(vocab::kLanguageTokens);
  std::iota(spec.synonym_map.begin(), spec.synonym_map.end(), 0);
  for (int p = 0; p < options.synonym_pairs; ++p) {
    const int a = *next++, b = *next++;
    spec.synonym_map[static_cast<std::size_t>(a)] = b;
    spec.synonym_map[static_cast<std::size_t>(b)] = a;
  }
  return spec;
}

std::string LanguageSpec::to_json() const {
  json j;
  j["seed"] = seed;
  j["in_dim"] = options.in_dim;
  j["frames_min"] = options.frames_min;
  j["frames_max"] = options.frames_max;
  j["noise_sigma_hex"] = detail::doubles_to_hex(&options.noise_sigma, 1);
  j["entity_set_size"] = options.entity_set_size;
  j["synonym_pairs"] = options.synonym_pairs;
  j["max_prototype_cosine_hex"] = detail::doubles_to_hex(&options.max_prototype_cosine, 1);
  j["prototypes_hex"] = detail::doubles_to_hex(prototypes.data(), prototypes.size());
  j["intent_triggers"] = intent_triggers;
  j["entity_sets"] = entity_sets;
  j["synonym_map"] = synonym_map;
  return j.dump();
}

LanguageSpec LanguageSpec::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    LanguageSpec spec;
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.options.in_dim = j.at("in_dim").get<std::size_t>();
    spec.options.frames_min = j.at("frames_min").get<int>();
    spec.options.frames_max = j.at("frames_max").get<int>();
    spec.options.entity_set_size = j.at("entity_set_size").get<int>();
    spec.options.synonym_pairs = j.at("synonym_pairs").get<int>();
    auto scalar = [&](const char* key) {
      const auto v = detail::hex_to_doubles(j.at(key).get<std::string>());
      if (!v || v->size() != 1) throw FormatError(std::string("language spec: bad ") + key);
      return (*v)[0];
    };
    spec.options.noise_sigma = scalar("noise_sigma_hex");
    spec.options.max_prototype_cosine = scalar("max_prototype_cosine_hex");
    const auto protos = detail::hex_to_doubles(j.at("prototypes_hex").get<std::string>());
    if (!protos || protos->size() != vocab::kLanguageTokens * spec.options.in_dim) {
      throw FormatError("language spec: prototypes_hex does not hold 64 x in_dim values");
    }
    spec.prototypes = Matrix(vocab::kLanguageTokens, spec.options.in_dim);
    std::copy(protos->begin(), protos->end(), spec.prototypes.data());
    spec.intent_triggers = j.at("intent_triggers").get<std::vector<int>>();
    spec.entity_sets = j.at("entity_sets").get<std::vector<std::vector<int>>>();
    spec.synonym_map = j.at("synonym_map").get<std::vector<int>>();
    if (spec.intent_triggers.size() != vocab::kIntentClasses ||
        spec.entity_sets.size() != vocab::kEntityClasses ||
        spec.synonym_map.size() != vocab::kLanguageTokens) {
      throw FormatError("language spec: role tables have the wrong size");
    }
    return spec;
  } catch (const json::exception& e) {
    throw FormatError(std::string("language spec: ") + e.what());
  }
}

std::string LanguageSpec::digest() const { return sha256_hex(to_json()); }

}  // namespace ualign
