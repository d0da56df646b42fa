#include "json_config.hpp"

#include <istream>

namespace ualign::cli {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

void flatten(const json& node, std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
  for (const auto& [key, value] : node.items()) {
    if (value.is_object()) {
      // "++" / "--" open and close a section; CLI11 uses them to activate
      // configurable subcommands.
      parents.push_back(key);
      CLI::ConfigItem open;
      open.parents = parents;
      open.name = "++";
      out.push_back(open);
      flatten(value, parents, out);
      CLI::ConfigItem close;
      close.parents = parents;
      close.name = "--";
      out.push_back(close);
      parents.pop_back();
      continue;
    }
    CLI::ConfigItem item;
    item.parents = parents;
    item.name = key;
    if (value.is_array()) {
      for (const json& v : value) item.inputs.push_back(scalar_text(v));
    } else if (!value.is_null()) {
      item.inputs.push_back(scalar_text(value));
    }
    out.push_back(std::move(item));
  }
}

// Numbers and booleans keep their JSON type so the echo reads naturally.
ordered_json typed(const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  const json parsed = json::parse(text, nullptr, false);
  if (parsed.is_number()) return parsed;
  return text;
}

bool skipped(const CLI::Option* opt) {
  const std::string name = opt->get_single_name();
  return name.empty() || name == "help" || name == "config" || name == "help-all";
}

}  // namespace

std::vector<CLI::ConfigItem> JsonConfig::from_config(std::istream& input) const {
  json root;
  try {
    input >> root;
  } catch (const json::parse_error& e) {
    throw CLI::ConversionError("config file is not valid JSON: " + std::string(e.what()));
  }
  if (!root.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
  std::vector<CLI::ConfigItem> items;
  std::vector<std::string> parents;
  flatten(root, parents, items);
  return items;
}

std::string JsonConfig::to_config(const CLI::App* app, bool, bool, std::string) const {
  ordered_json root = ordered_json::object();
  for (const CLI::App* sub : app->get_subcommands({})) {
    if (sub->parsed()) root[sub->get_name()] = resolved_options(*sub);
  }
  return root.dump(2);
}

ordered_json resolved_options(const CLI::App& command) {
  ordered_json out = ordered_json::object();
  for (const CLI::Option* opt : command.get_options()) {
    if (skipped(opt)) continue;
    const std::string name = opt->get_single_name();
    if (opt->get_expected_min() == 0) {   // flag
      out[name] = opt->count() > 0;
      continue;
    }
    std::vector<std::string> values = opt->count() > 0 ? opt->results() : std::vector<std::string>{};
    if (values.empty()) {
      const std::string def = opt->get_default_str();
      if (def.empty()) continue;
      values.push_back(def);
    }
    if (opt->get_expected_max() > 1 || values.size() > 1) {
      ordered_json arr = ordered_json::array();
      for (const std::string& v : values) arr.push_back(typed(v));
      out[name] = arr;
    } else {
      out[name] = typed(values.front());
    }
  }
  return out;
}

ordered_json echo_config(const CLI::App& command) {
  ordered_json root = ordered_json::object();
  root[command.get_name()] = resolved_options(command);
  return root;
}

}  // namespace ualign::cli
