#include "ualign/corpus/corpus_io.hpp"

#include "hex.hpp"
#include "json.hpp"
#include "ualign/numerics/error.hpp"

namespace ualign {

using json = nlohmann::ordered_json;

std::string sample_to_json_line(const Sample& s) {
  json j;
  j["id"] = s.id;
  j["task"] = task_name(s.task);
  j["tokens"] = s.tokens;
  j["speech_hex"] = detail::doubles_to_hex(s.speech.data(), s.speech.size());
  j["T"] = s.speech.rows();
  j["in_dim"] = s.speech.cols();
  j["alignment"] = s.alignment;
  j["target"] = s.target;
  return j.dump();
}

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& field, const std::string& what) {
  throw FormatError("corpus line " + std::to_string(line) + ": field '" + field + "': " + what);
}

const json& field(const json& j, const char* name, std::size_t line) {
  const auto it = j.find(name);
  if (it == j.end()) fail(line, name, "missing");
  return *it;
}

std::vector<int> int_array(const json& j, const char* name, std::size_t line) {
  const json& v = field(j, name, line);
  if (!v.is_array()) fail(line, name, "expected an array of integers");
  std::vector<int> out;
  out.reserve(v.size());
  for (const json& x : v) {
    if (!x.is_number_integer()) fail(line, name, "expected an array of integers");
    out.push_back(x.get<int>());
  }
  return out;
}

std::size_t count_field(const json& j, const char* name, std::size_t line) {
  const json& v = field(j, name, line);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    fail(line, name, "expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace

Sample sample_from_json_line(std::string_view text, std::size_t line) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError("corpus line " + std::to_string(line) + ": malformed JSON (" + e.what() + ")");
  }
  if (!j.is_object()) throw FormatError("corpus line " + std::to_string(line) + ": expected an object");
  Sample s;
  const json& id = field(j, "id", line);
  if (!id.is_string()) fail(line, "id", "expected a string");
  s.id = id.get<std::string>();
  const json& task = field(j, "task", line);
  if (!task.is_string()) fail(line, "task", "expected a string");
  try {
    s.task = parse_task(task.get<std::string>());
  } catch (const InvalidArgument& e) {
    fail(line, "task", e.what());
  }
  s.tokens = int_array(j, "tokens", line);
  s.alignment = int_array(j, "alignment", line);
  s.target = int_array(j, "target", line);
  const std::size_t frames = count_field(j, "T", line);
  const std::size_t in_dim = count_field(j, "in_dim", line);
  const json& hex = field(j, "speech_hex", line);
  if (!hex.is_string()) fail(line, "speech_hex", "expected a string");
  const auto values = detail::hex_to_doubles(hex.get_ref<const std::string&>());
  if (!values) fail(line, "speech_hex", "not a hex encoding of 64-bit floats");
  if (values->size() != frames * in_dim) {
    fail(line, "speech_hex", "holds " + std::to_string(values->size()) + " values, T x in_dim = " +
                                 std::to_string(frames * in_dim));
  }
  s.speech = Matrix(frames, in_dim);
  std::copy(values->begin(), values->end(), s.speech.data());
  for (int t : s.tokens)
    if (!vocab::is_language(t)) fail(line, "tokens", "token " + std::to_string(t) + " out of range");
  if (s.alignment.size() != frames) fail(line, "alignment", "length differs from T");
  // Monotone, steps of at most one, covering token 0 .. L-1.
  for (std::size_t f = 0; f < frames; ++f) {
    const int prev = f == 0 ? 0 : s.alignment[f - 1];
    const int a = s.alignment[f];
    if (f == 0 ? a != 0 : (a != prev && a != prev + 1)) fail(line, "alignment", "not monotone and contiguous");
  }
  if (s.tokens.empty() || frames == 0 || s.alignment.back() != static_cast<int>(s.tokens.size()) - 1) {
    fail(line, "alignment", "does not cover every token");
  }
  return s;
}

CorpusWriter::CorpusWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
  if (!out_) throw IoError("cannot open corpus file for writing: " + path.string());
}

void CorpusWriter::write(const Sample& sample) {
  out_ << sample_to_json_line(sample) << '\n';
  if (!out_) throw IoError("write failed: " + path_.string());
  ++count_;
}

void CorpusWriter::close() {
  out_.close();
  if (out_.fail()) throw IoError("closing corpus file failed: " + path_.string());
}

CorpusReader::CorpusReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw IoError("cannot open corpus file: " + path.string());
}

std::optional<Sample> CorpusReader::next() {
  std::string text;
  while (std::getline(in_, text)) {
    ++line_;
    if (text.empty()) continue;
    return sample_from_json_line(text, line_);
  }
  if (in_.bad()) throw IoError("read failed: " + path_.string());
  return std::nullopt;
}

void corpus_write(std::span<const Sample> samples, const std::filesystem::path& path) {
  CorpusWriter w(path);
  for (const Sample& s : samples) w.write(s);
  w.close();
}

std::vector<Sample> corpus_read(const std::filesystem::path& path) {
  CorpusReader r(path);
  std::vector<Sample> out;
  while (auto s = r.next()) out.push_back(std::move(*s));
  return out;
}

}  // namespace ualign
