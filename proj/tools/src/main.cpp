#include <filesystem>
#include <iostream>
#include <map>
#include <memory>

#include "CLI11.hpp"
#include "commands.hpp"
#include "json_config.hpp"
#include "ualign/numerics/error.hpp"

using namespace ualign;
using namespace ualign::cli;

int main(int argc, char** argv) {
  CLI::App app{"ualign: speech-to-LLM adapter alignment on a synthetic language"};
  app.option_defaults()->always_capture_default();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config: {\"<command>\": {\"<flag>\": value}}");
  app.require_subcommand(1);
  app.fallthrough();

  const std::map<std::string, Handler> handlers{
      {"synth", register_synth(app)},     {"pipeline", register_pipeline(app)},
      {"pretrain", register_pretrain(app)}, {"train", register_train(app)},
      {"eval", register_eval(app)},         {"oracle", register_oracle(app)},
      {"project", register_project(app)},
  };
  for (CLI::App* sub : app.get_subcommands({})) sub->configurable();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return handlers.at(command)();
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}
