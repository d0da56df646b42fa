#include "ualign/numerics/rng.hpp"

#include <cmath>
#include <numbers>

namespace ualign {

namespace {
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kLabelSalt = 0x632BE59BD9B4E019ULL;
constexpr std::uint64_t kIndexSalt = 0xD1B54A32D192ED03ULL;
}  // namespace

std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

Rng::Rng(std::uint64_t seed) noexcept : key_(splitmix64(seed + kGamma)), counter_(0) {}

Rng Rng::split(std::string_view label) const noexcept {
  return Rng(splitmix64(key_ ^ splitmix64(fnv1a64(label) + kLabelSalt)), 0);
}

Rng Rng::split(std::uint64_t index) const noexcept {
  return Rng(splitmix64(key_ ^ splitmix64(index * kGamma + kIndexSalt)), 0);
}

std::uint64_t Rng::next_u64() noexcept {
  ++counter_;
  return splitmix64(key_ + counter_ * kGamma);
}

double Rng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

double Rng::normal() noexcept {
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) noexcept {
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

int Rng::range(int lo, int hi) noexcept {
  return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1)));
}

}  // namespace ualign
