#pragma once

#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace ualign::cli {

// Config files are JSON objects keyed by subcommand:
//   {"train": {"regime": "ualign_dtw", "epochs": 3}}
// Top-level scalar keys apply to the root command.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool write_description,
                        std::string prefix) const override;
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;
};

// Resolved settings of one subcommand (flags given, config values and
// defaults), in the shape JsonConfig reads back.
nlohmann::ordered_json resolved_options(const CLI::App& command);

// {"<command>": resolved_options(command)}: a config file that reruns it.
nlohmann::ordered_json echo_config(const CLI::App& command);

}  // namespace ualign::cli
