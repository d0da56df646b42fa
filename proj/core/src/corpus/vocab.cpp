#include "ualign/corpus/vocab.hpp"

#include <algorithm>
#include <cctype>

#include "ualign/numerics/error.hpp"

namespace ualign {

std::string_view task_name(Task task) {
  switch (task) {
    case Task::kAsr: return "asr";
    case Task::kIc: return "ic";
    case Task::kNer: return "ner";
    case Task::kSr: return "sr";
  }
  return "?";
}

Task parse_task(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (Task t : kAllTasks)
    if (task_name(t) == lower) return t;
  throw InvalidArgument("unknown task '" + std::string(name) + "' (expected asr, ic, ner or sr)");
}

std::array<int, 2> prompt_tokens(Task task) {
  const int base = vocab::kPromptBase + vocab::kPromptTokensPerTask * static_cast<int>(task);
  return {base, base + 1};
}

}  // namespace ualign
