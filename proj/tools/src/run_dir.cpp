#include "run_dir.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ualign/numerics/error.hpp"
#include "ualign/numerics/tensor.hpp"

namespace ualign::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kLock = ".lock";
constexpr const char* kIncomplete = ".incomplete";

}  // namespace

RunDir::RunDir(const fs::path& root, const nlohmann::ordered_json& config) : root_(root) {
  if (root_.empty()) throw InvalidArgument("--out must name a directory");
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw IoError("cannot create " + root_.string() + ": " + ec.message());

  const fs::path lock = root_ / kLock;
  const int fd = ::open(lock.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
  if (fd < 0) {
    if (errno == EEXIST)
      throw IoError(root_.string() + " is in use by another run (remove " + lock.string() +
                    " if that run is gone)");
    throw IoError("cannot lock " + root_.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
  locked_ = true;

  write_text(root_ / kIncomplete, "");
  write_text(root_ / "config.echo.json", config.dump(2) + "\n");
}

RunDir::~RunDir() {
  if (!locked_) return;
  std::error_code ec;
  fs::remove(root_ / kLock, ec);
}

void RunDir::commit() {
  std::error_code ec;
  fs::remove(root_ / kIncomplete, ec);
  if (ec) throw IoError("cannot finalize " + root_.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

}  // namespace ualign::cli
