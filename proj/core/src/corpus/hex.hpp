#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ualign::detail {

// Doubles as little-endian bytes, two lowercase hex digits per byte.
inline std::string doubles_to_hex(const double* values, std::size_t n) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(16 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) {
      const auto byte = static_cast<unsigned>((bits >> (8 * b)) & 0xFF);
      out.push_back(kHex[byte >> 4]);
      out.push_back(kHex[byte & 0xF]);
    }
  }
  return out;
}

inline int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

// Empty optional on a malformed string.
inline std::optional<std::vector<double>> hex_to_doubles(std::string_view hex) {
  if (hex.size() % 16 != 0) return std::nullopt;
  std::vector<double> out(hex.size() / 16);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      const int hi = hex_digit(hex[16 * i + 2 * b]), lo = hex_digit(hex[16 * i + 2 * b + 1]);
      if (hi < 0 || lo < 0) return std::nullopt;
      bits |= static_cast<std::uint64_t>(hi * 16 + lo) << (8 * b);
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

}  // namespace ualign::detail
