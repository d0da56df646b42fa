#pragma once

#include <cstdint>
#include <string>
#include <span>
#include <vector>

#include "ualign/corpus/language.hpp"
#include "ualign/numerics/rng.hpp"

namespace ualign {

struct Sample {
  std::string id;
  Task task = Task::kAsr;
  std::vector<int> tokens;
  Matrix speech;                 // T x in_dim
  std::vector<int> alignment;    // per frame: index into tokens
  std::vector<int> target;

  std::size_t frames() const noexcept { return speech.rows(); }
  friend bool operator==(const Sample&, const Sample&) = default;
};

inline constexpr int kMinTokens = 4;
inline constexpr int kMaxTokens = 16;

// Task rules. IC: class of the first trigger token (throws when there is
// none); NER: BIO tag per token; SR: synonym map per token; ASR: identity.
std::vector<int> task_target(const LanguageSpec& spec, Task task, std::span<const int> tokens);

// Token sequence for a task: length 4..16. IC sequences carry exactly one
// trigger; NER sequences carry one or two entity spans of length 1..3.
std::vector<int> draw_tokens(const LanguageSpec& spec, Task task, Rng& rng);

struct Rendering {
  Matrix speech;
  std::vector<int> alignment;
};

// Each token emits frames_min..frames_max frames of prototype + N(0, sigma^2).
Rendering render_speech(const LanguageSpec& spec, std::span<const int> tokens, Rng& rng);

Sample synth_sample(const LanguageSpec& spec, Task task, Rng rng, std::string id);

// Counts per task, in kAllTasks order.
struct TaskCounts {
  std::size_t asr = 0, ic = 0, ner = 0, sr = 0;
  std::size_t total() const noexcept { return asr + ic + ner + sr; }
  std::size_t of(Task t) const noexcept;
};

// Splits `total` by integer weights with largest-remainder rounding.
TaskCounts split_counts(std::size_t total, const TaskCounts& weights);

// Sample k of a corpus draws from rng.split(k), so any prefix or reordering
// of generation yields the same samples. Tasks are interleaved in a seeded
// order; ids are "<prefix>-<k>".
class CorpusGenerator {
 public:
  CorpusGenerator(const LanguageSpec& spec, TaskCounts counts, std::uint64_t seed,
                  std::string prefix = "s");
  std::size_t size() const noexcept { return tasks_.size(); }
  Sample at(std::size_t k) const;
  std::vector<Sample> all() const;

 private:
  const LanguageSpec* spec_;
  std::vector<Task> tasks_;
  Rng rng_;
  std::string prefix_;
};

// Digest over every field of every sample.
std::string samples_digest(std::span<const Sample> samples);

}  // namespace ualign
