#pragma once

#include <array>
#include <string>
#include <string_view>

namespace ualign {

// Token id layout shared by the corpus, the toy LLM and the trainer.
//   0..63   language tokens
//   64..67  PAD, BOS, EOS, BLANK
//   68..75  task prompts, two tokens per task (ASR, IC, NER, SR)
//   76..83  intent classes
//   84..90  NER tags: O, B-PER, I-PER, B-LOC, I-LOC, B-ORG, I-ORG
namespace vocab {

inline constexpr int kLanguageTokens = 64;
inline constexpr int kPad = 64;
inline constexpr int kBos = 65;
inline constexpr int kEos = 66;
inline constexpr int kBlank = 67;
inline constexpr int kPromptBase = 68;
inline constexpr int kPromptTokensPerTask = 2;
inline constexpr int kIntentBase = 76;
inline constexpr int kIntentClasses = 8;
inline constexpr int kTagBase = 84;
inline constexpr int kTagO = 84;
inline constexpr int kEntityClasses = 3;
inline constexpr int kSize = 91;

// B tag of entity class c (0 = PER, 1 = LOC, 2 = ORG); the I tag follows it.
constexpr int begin_tag(int entity_class) { return kTagBase + 1 + 2 * entity_class; }
constexpr int inside_tag(int entity_class) { return begin_tag(entity_class) + 1; }
// Entity class of a tag token, or -1 for O.
constexpr int tag_entity_class(int tag) { return tag <= kTagO ? -1 : (tag - kTagBase - 1) / 2; }

constexpr bool is_language(int t) { return t >= 0 && t < kLanguageTokens; }

}  // namespace vocab

enum class Task { kAsr = 0, kIc = 1, kNer = 2, kSr = 3 };

inline constexpr std::array<Task, 4> kAllTasks{Task::kAsr, Task::kIc, Task::kNer, Task::kSr};
inline constexpr std::array<const char*, 3> kEntityNames{"PER", "LOC", "ORG"};

std::string_view task_name(Task task);
// Accepts "asr", "ic", "ner", "sr" (case-insensitive); throws InvalidArgument.
Task parse_task(std::string_view name);
std::array<int, 2> prompt_tokens(Task task);

}  // namespace ualign
