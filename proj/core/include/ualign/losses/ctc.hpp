#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ualign/numerics/matrix.hpp"

namespace ualign {

struct CtcSetup {
  std::size_t vocab_size = 0;   // including the blank
  int blank_id = 0;
  Matrix log_probs;             // T x vocab_size, rows normalised in log space

  // Row-wise log-softmax of unnormalised logits.
  static CtcSetup from_logits(const Matrix& logits, int blank_id);

  std::size_t frames() const noexcept { return log_probs.rows(); }
  void validate() const;
};

struct CtcForwardResult {
  double loss = 0.0;   // -log p(labels | input)
  Matrix log_alpha;    // T x (2L + 1)
};

// Fewest frames able to emit `labels`: L plus one blank per adjacent repeat.
std::size_t ctc_min_frames(std::span<const int> labels);

CtcForwardResult ctc_forward(const CtcSetup& setup, std::span<const int> labels);

// Sums the probability of every length-T string whose collapse equals
// labels. Refuses vocab_size^T above max_strings.
double ctc_bruteforce(const CtcSetup& setup, std::span<const int> labels,
                      std::uint64_t max_strings = 1'000'000);

// Gradient of the loss with respect to the logits fed to from_logits:
// softmax minus the alpha-beta state posterior.
Matrix ctc_backward(const CtcSetup& setup, std::span<const int> labels);

}  // namespace ualign
