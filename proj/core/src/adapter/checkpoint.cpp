#include "ualign/adapter/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ualign/numerics/error.hpp"

namespace ualign {

namespace {

constexpr char kMagic[4] = {'U', 'A', 'L', 'N'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void i64(std::int64_t v) { le(static_cast<std::uint64_t>(v), 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::string take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}

  std::uint64_t le(int n, const char* what) {
    need(static_cast<std::size_t>(n), what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(le(4, what)); }
  std::uint64_t u64(const char* what) { return le(8, what); }
  std::int64_t i64(const char* what) { return static_cast<std::int64_t>(le(8, what)); }
  double f64(const char* what) { return std::bit_cast<double>(le(8, what)); }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n, const char* what) const {
    if (pos_ + n > in_.size()) {
      throw FormatError(std::string("checkpoint truncated while reading ") + what + " at byte " +
                        std::to_string(pos_));
    }
  }
  std::size_t pos() const { return pos_; }
  std::size_t size() const { return in_.size(); }

 private:
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::optional<std::int64_t> Checkpoint::attribute(const std::string& key) const {
  for (const auto& [k, v] : attributes)
    if (k == key) return v;
  return std::nullopt;
}

std::int64_t Checkpoint::require_attribute(const std::string& key) const {
  if (auto v = attribute(key)) return *v;
  throw FormatError("checkpoint section '" + section + "' lacks attribute '" + key + "'");
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.str(ckpt.section);
  w.u32(static_cast<std::uint32_t>(ckpt.attributes.size()));
  for (const auto& [k, v] : ckpt.attributes) {
    w.str(k);
    w.i64(v);
  }
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  std::uint64_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) w.u64(d);
    w.u64(offset);
    offset += t.value.size();
  }
  w.u64(offset);
  for (const auto& t : ckpt.tensors)
    for (double v : t.value) w.f64(v);
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("not a checkpoint: expected magic 'UALN'");
  }
  r.le(4, "magic");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint version mismatch: expected " +
                      std::to_string(kCheckpointVersion) + ", found " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.section = r.str("section name");
  const std::uint32_t n_attr = r.u32("attribute count");
  for (std::uint32_t i = 0; i < n_attr; ++i) {
    std::string key = r.str("attribute key");
    ckpt.attributes.emplace_back(std::move(key), r.i64("attribute value"));
  }
  const std::uint32_t n_tensor = r.u32("tensor count");
  std::vector<std::uint64_t> offsets;
  for (std::uint32_t i = 0; i < n_tensor; ++i) {
    Tensor t;
    t.name = r.str("tensor name");
    const std::uint32_t rank = r.u32("tensor rank");
    for (std::uint32_t k = 0; k < rank; ++k) t.shape.push_back(r.u64("tensor dim"));
    offsets.push_back(r.u64("tensor offset"));
    ckpt.tensors.push_back(std::move(t));
  }
  const std::uint64_t n_values = r.u64("value count");
  if (r.size() - r.pos() != n_values * 8) {
    throw FormatError("checkpoint value block holds " + std::to_string(r.size() - r.pos()) +
                      " bytes, manifest declares " + std::to_string(n_values * 8));
  }
  const std::size_t base = r.pos();
  for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) {
    Tensor& t = ckpt.tensors[i];
    const std::size_t n = shape_numel(t.shape);
    if (offsets[i] + n > n_values) {
      throw FormatError("tensor '" + t.name + "' extends past the value block");
    }
    t.value.resize(n);
    t.grad.assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      std::uint64_t bits = 0;
      const std::size_t at = base + (offsets[i] + k) * 8;
      for (int b = 0; b < 8; ++b)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at + b])) << (8 * b);
      t.value[k] = std::bit_cast<double>(bits);
    }
  }
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

Checkpoint adapter_to_checkpoint(const AdapterParams& params) {
  const AdapterConfig& c = params.config();
  Checkpoint ckpt;
  ckpt.section = kAdapterSection;
  auto attr = [&](const char* k, std::size_t v) {
    ckpt.attributes.emplace_back(k, static_cast<std::int64_t>(v));
  };
  attr("in_dim", c.in_dim);
  attr("hidden_dim", c.hidden_dim);
  attr("out_dim", c.out_dim);
  attr("conv_kernel", c.conv_kernel);
  attr("conv_stride", c.conv_stride);
  attr("conv_layers", c.conv_layers);
  attr("mlp_hidden", c.mlp_hidden);
  ckpt.tensors.assign(params.tensors().begin(), params.tensors().end());
  return ckpt;
}

AdapterParams adapter_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.section != kAdapterSection) {
    throw FormatError("expected checkpoint section '" + std::string(kAdapterSection) +
                      "', found '" + ckpt.section + "'");
  }
  AdapterConfig c;
  auto get = [&](const char* k) {
    const std::int64_t v = ckpt.require_attribute(k);
    if (v < 1) throw FormatError(std::string("adapter attribute '") + k + "' must be >= 1");
    return static_cast<std::size_t>(v);
  };
  c.in_dim = get("in_dim");
  c.hidden_dim = get("hidden_dim");
  c.out_dim = get("out_dim");
  c.conv_kernel = get("conv_kernel");
  c.conv_stride = get("conv_stride");
  c.conv_layers = get("conv_layers");
  c.mlp_hidden = get("mlp_hidden");
  AdapterParams params(c);
  auto tensors = params.tensors();
  if (ckpt.tensors.size() != tensors.size()) {
    throw ShapeError("adapter checkpoint: expected " + std::to_string(tensors.size()) +
                     " tensors, found " + std::to_string(ckpt.tensors.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const Tensor& src = ckpt.tensors[i];
    if (src.name != tensors[i].name || src.shape != tensors[i].shape) {
      throw ShapeError("adapter checkpoint tensor " + std::to_string(i) + ": expected '" +
                       tensors[i].name + "' " + tensors[i].shape_string() + ", found '" +
                       src.name + "' " + src.shape_string());
    }
    tensors[i].value = src.value;
  }
  return params;
}

void checkpoint_save(const AdapterParams& params, const std::filesystem::path& path) {
  write_checkpoint(path, adapter_to_checkpoint(params));
}

AdapterParams checkpoint_load(const std::filesystem::path& path) {
  return adapter_from_checkpoint(read_checkpoint(path));
}

}  // namespace ualign
