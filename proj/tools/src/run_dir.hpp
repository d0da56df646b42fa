#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

namespace ualign::cli {

// Output directory of one command. Holds out/.lock for its lifetime so two
// commands never write the same directory, and leaves out/.incomplete
// behind unless commit() is reached.
class RunDir {
 public:
  RunDir(const std::filesystem::path& root, const nlohmann::ordered_json& config);
  ~RunDir();
  RunDir(const RunDir&) = delete;
  RunDir& operator=(const RunDir&) = delete;

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path operator/(const std::string& name) const { return root_ / name; }

  void commit();

 private:
  std::filesystem::path root_;
  bool locked_ = false;
};

// Whole-file write through a temporary sibling and rename.
void write_text(const std::filesystem::path& path, const std::string& text);

// sha256 of a file's bytes, hex.
std::string file_digest(const std::filesystem::path& path);

}  // namespace ualign::cli
