#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace ualign {

// Counter-based generator: each draw is splitmix64(key + counter * gamma),
// so streams are reproducible bit-for-bit on any platform. split() derives
// an independent child stream from a label without advancing the parent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept;

  Rng split(std::string_view label) const noexcept;
  Rng split(std::uint64_t index) const noexcept;

  std::uint64_t next_u64() noexcept;
  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept;
  // Standard normal via Box-Muller; consumes two draws per call.
  double normal() noexcept;
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;
  // Uniform integer in the closed range [lo, hi].
  int range(int lo, int hi) noexcept;

  template <typename T>
  void shuffle(std::vector<T>& v) noexcept {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  Rng(std::uint64_t key, std::uint64_t counter) noexcept : key_(key), counter_(counter) {}

  std::uint64_t key_;
  std::uint64_t counter_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view s) noexcept;

}  // namespace ualign
