#pragma once

#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ualign/corpus/sample.hpp"

namespace ualign::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitOracle = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumeric = 4;

// Each register_* adds a subcommand and returns the handler to run once the
// command line (and any --config file) has been parsed.
using Handler = std::function<int()>;

Handler register_synth(CLI::App& app);
Handler register_pipeline(CLI::App& app);
Handler register_pretrain(CLI::App& app);
Handler register_train(CLI::App& app);
Handler register_eval(CLI::App& app);
Handler register_oracle(CLI::App& app);
Handler register_project(CLI::App& app);

// "asr,ic,ner,sr" -> tasks; duplicates and unknown names throw.
std::vector<Task> parse_task_list(const std::string& text);
// "927:175:648:250" -> positive integer weights.
std::vector<std::size_t> parse_ratio(const std::string& text);

void warn(const std::string& message);

}  // namespace ualign::cli
