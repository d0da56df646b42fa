#include "ualign/corpus/sample.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <numeric>

#include "ualign/numerics/error.hpp"
#include "ualign/numerics/tensor.hpp"

namespace ualign {

std::vector<int> task_target(const LanguageSpec& spec, Task task, std::span<const int> tokens) {
  for (int t : tokens) {
    if (!vocab::is_language(t)) {
      throw InvalidArgument("task_target: token " + std::to_string(t) + " is not a language token");
    }
  }
  std::vector<int> out;
  switch (task) {
    case Task::kAsr:
      out.assign(tokens.begin(), tokens.end());
      break;
    case Task::kIc: {
      for (int t : tokens) {
        const int c = spec.intent_of(t);
        if (c >= 0) return {vocab::kIntentBase + c};
      }
      throw InvalidArgument("task_target: IC sequence contains no trigger token");
    }
    case Task::kNer:
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        const int c = spec.entity_class_of(tokens[i]);
        if (c < 0) {
          out.push_back(vocab::kTagO);
        } else if (i > 0 && spec.entity_class_of(tokens[i - 1]) == c) {
          out.push_back(vocab::inside_tag(c));
        } else {
          out.push_back(vocab::begin_tag(c));
        }
      }
      break;
    case Task::kSr:
      for (int t : tokens) out.push_back(spec.synonym_map[static_cast<std::size_t>(t)]);
      break;
  }
  return out;
}

namespace {

int draw_from(const std::vector<int>& pool, Rng& rng) {
  return pool[rng.below(pool.size())];
}

std::vector<int> pool_where(const LanguageSpec& spec, bool (*keep)(const LanguageSpec&, int)) {
  std::vector<int> pool;
  for (int t = 0; t < vocab::kLanguageTokens; ++t)
    if (keep(spec, t)) pool.push_back(t);
  return pool;
}

}  // namespace

std::vector<int> draw_tokens(const LanguageSpec& spec, Task task, Rng& rng) {
  const int length = rng.range(kMinTokens, kMaxTokens);
  std::vector<int> tokens(static_cast<std::size_t>(length));
  auto pos = [&] { return static_cast<std::size_t>(rng.below(tokens.size())); };
  switch (task) {
    case Task::kAsr: {
      for (int& t : tokens) t = static_cast<int>(rng.below(vocab::kLanguageTokens));
      break;
    }
    case Task::kIc: {
      const auto pool = pool_where(spec, [](const LanguageSpec& s, int t) { return s.intent_of(t) < 0; });
      for (int& t : tokens) t = draw_from(pool, rng);
      tokens[pos()] = spec.intent_triggers[rng.below(spec.intent_triggers.size())];
      break;
    }
    case Task::kNer: {
      const auto pool =
          pool_where(spec, [](const LanguageSpec& s, int t) { return s.entity_class_of(t) < 0; });
      for (int& t : tokens) t = draw_from(pool, rng);
      const int spans = rng.range(1, 2);
      for (int s = 0; s < spans; ++s) {
        const auto& set = spec.entity_sets[rng.below(spec.entity_sets.size())];
        const std::size_t span = static_cast<std::size_t>(rng.range(1, 3));
        const std::size_t start = rng.below(tokens.size() - span + 1);
        for (std::size_t k = 0; k < span; ++k) tokens[start + k] = draw_from(set, rng);
      }
      break;
    }
    case Task::kSr: {
      for (int& t : tokens) t = static_cast<int>(rng.below(vocab::kLanguageTokens));
      const auto pool = pool_where(spec, [](const LanguageSpec& s, int t) {
        return s.synonym_map[static_cast<std::size_t>(t)] != t;
      });
      if (!pool.empty()) tokens[pos()] = draw_from(pool, rng);
      break;
    }
  }
  return tokens;
}

Rendering render_speech(const LanguageSpec& spec, std::span<const int> tokens, Rng& rng) {
  std::vector<int> counts(tokens.size());
  std::size_t total = 0;
  for (auto& c : counts) {
    c = rng.range(spec.options.frames_min, spec.options.frames_max);
    total += static_cast<std::size_t>(c);
  }
  Rendering r;
  r.speech = Matrix(total, spec.options.in_dim);
  r.alignment.reserve(total);
  std::size_t frame = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!vocab::is_language(tokens[i])) {
      throw InvalidArgument("render_speech: token " + std::to_string(tokens[i]) +
                            " has no acoustic prototype");
    }
    const auto proto = spec.prototypes.row(static_cast<std::size_t>(tokens[i]));
    for (int k = 0; k < counts[i]; ++k, ++frame) {
      auto row = r.speech.row(frame);
      for (std::size_t d = 0; d < row.size(); ++d) {
        row[d] = proto[d] + (spec.options.noise_sigma > 0.0 ? spec.options.noise_sigma * rng.normal() : 0.0);
      }
      r.alignment.push_back(static_cast<int>(i));
    }
  }
  return r;
}

Sample synth_sample(const LanguageSpec& spec, Task task, Rng rng, std::string id) {
  Sample s;
  s.id = std::move(id);
  s.task = task;
  Rng token_rng = rng.split("tokens");
  s.tokens = draw_tokens(spec, task, token_rng);
  Rng speech_rng = rng.split("speech");
  Rendering r = render_speech(spec, s.tokens, speech_rng);
  s.speech = std::move(r.speech);
  s.alignment = std::move(r.alignment);
  s.target = task_target(spec, task, s.tokens);
  return s;
}

std::size_t TaskCounts::of(Task t) const noexcept {
  switch (t) {
    case Task::kAsr: return asr;
    case Task::kIc: return ic;
    case Task::kNer: return ner;
    case Task::kSr: return sr;
  }
  return 0;
}

TaskCounts split_counts(std::size_t total, const TaskCounts& weights) {
  const std::size_t sum = weights.total();
  if (sum == 0) throw InvalidArgument("split_counts: all task weights are zero");
  std::array<std::size_t, 4> base{}, rem{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    const std::size_t num = total * weights.of(kAllTasks[k]);
    base[k] = num / sum;
    rem[k] = num % sum;
    assigned += base[k];
  }
  std::array<std::size_t, 4> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++base[order[k]];
  return {base[0], base[1], base[2], base[3]};
}

CorpusGenerator::CorpusGenerator(const LanguageSpec& spec, TaskCounts counts, std::uint64_t seed,
                                 std::string prefix)
    : spec_(&spec), rng_(Rng(seed).split("corpus")), prefix_(std::move(prefix)) {
  for (Task t : kAllTasks) tasks_.insert(tasks_.end(), counts.of(t), t);
  Rng order = rng_.split("order");
  order.shuffle(tasks_);
}

Sample CorpusGenerator::at(std::size_t k) const {
  char id[32];
  std::snprintf(id, sizeof id, "%06zu", k);
  return synth_sample(*spec_, tasks_.at(k), rng_.split(static_cast<std::uint64_t>(k)),
                      prefix_ + "-" + id);
}

std::vector<Sample> CorpusGenerator::all() const {
  std::vector<Sample> out;
  out.reserve(size());
  for (std::size_t k = 0; k < size(); ++k) out.push_back(at(k));
  return out;
}

std::string samples_digest(std::span<const Sample> samples) {
  std::string bytes;
  auto put = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
  };
  auto put_ints = [&](const std::vector<int>& v) {
    put(v.size());
    for (int x : v) put(static_cast<std::uint64_t>(static_cast<std::int64_t>(x)));
  };
  for (const Sample& s : samples) {
    put(s.id.size());
    bytes += s.id;
    put(static_cast<std::uint64_t>(s.task));
    put_ints(s.tokens);
    put(s.speech.rows());
    put(s.speech.cols());
    for (double v : s.speech.values()) put(std::bit_cast<std::uint64_t>(v));
    put_ints(s.alignment);
    put_ints(s.target);
  }
  return sha256_hex(bytes);
}

}  // namespace ualign
