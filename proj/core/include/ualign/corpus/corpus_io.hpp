#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ualign/corpus/sample.hpp"

namespace ualign {

// One sample per line:
//   {"id", "task", "tokens", "speech_hex", "T", "in_dim", "alignment", "target"}
// speech_hex holds the T x in_dim row-major doubles as little-endian bytes
// in hex, so values round-trip bit for bit.
std::string sample_to_json_line(const Sample& sample);

// Throws FormatError("corpus line N: field 'x': ...") on schema violations.
Sample sample_from_json_line(std::string_view line, std::size_t line_number);

class CorpusWriter {
 public:
  explicit CorpusWriter(const std::filesystem::path& path);
  void write(const Sample& sample);
  void close();
  std::size_t count() const noexcept { return count_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t count_ = 0;
};

// Streams samples one line at a time.
class CorpusReader {
 public:
  explicit CorpusReader(const std::filesystem::path& path);
  std::optional<Sample> next();
  std::size_t line_number() const noexcept { return line_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t line_ = 0;
};

void corpus_write(std::span<const Sample> samples, const std::filesystem::path& path);
std::vector<Sample> corpus_read(const std::filesystem::path& path);

}  // namespace ualign
