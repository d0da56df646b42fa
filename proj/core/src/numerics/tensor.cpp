#include "ualign/numerics/tensor.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <memory>

#include "ualign/numerics/error.hpp"

namespace ualign {

std::size_t shape_numel(std::span<const std::size_t> shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(std::string n, std::vector<std::size_t> s)
    : name(std::move(n)), shape(std::move(s)) {
  const std::size_t count = shape_numel(shape);
  value.assign(count, 0.0);
  grad.assign(count, 0.0);
}

std::size_t Tensor::cols() const noexcept {
  if (shape.size() < 2) return 1;
  return shape_numel(std::span(shape).subspan(1));
}

void Tensor::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Matrix Tensor::as_matrix() const { return Matrix(rows(), cols(), value); }

void zero_grads(std::span<Tensor> tensors) {
  for (auto& t : tensors) t.zero_grad();
}

bool same_values(std::span<const Tensor> a, std::span<const Tensor> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || a[i].shape != b[i].shape) return false;
    if (std::memcmp(a[i].value.data(), b[i].value.data(), a[i].value.size() * sizeof(double)) !=
        0) {
      return false;
    }
  }
  return true;
}

namespace {

struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

void update_u64(EVP_MD_CTX* ctx, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  EVP_DigestUpdate(ctx, buf, sizeof buf);
}

using DigestCtx = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;

DigestCtx sha256_begin() {
  DigestCtx ctx(EVP_MD_CTX_new());
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error("failed to initialise SHA-256 context");
  }
  return ctx;
}

std::string sha256_finish(EVP_MD_CTX* ctx) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

}  // namespace

std::string tensor_digest(std::span<const Tensor> tensors) {
  DigestCtx ctx = sha256_begin();
  for (const auto& t : tensors) {
    update_u64(ctx.get(), t.name.size());
    EVP_DigestUpdate(ctx.get(), t.name.data(), t.name.size());
    update_u64(ctx.get(), t.shape.size());
    for (auto d : t.shape) update_u64(ctx.get(), d);
    for (double v : t.value) update_u64(ctx.get(), std::bit_cast<std::uint64_t>(v));
  }
  return sha256_finish(ctx.get());
}

std::string sha256_hex(std::string_view bytes) {
  DigestCtx ctx = sha256_begin();
  EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size());
  return sha256_finish(ctx.get());
}

}  // namespace ualign
