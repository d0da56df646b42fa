#pragma once

#include <span>
#include <vector>

#include "ualign/toyllm/llm.hpp"

namespace ualign {

// LLM input [prompt; H; BOS; target] with next-token labels: the BOS
// position predicts target[0], each target position predicts the next
// one, and the last predicts EOS. Every other label is kIgnore.
struct LlmSequence {
  static constexpr int kIgnore = -1;
  Matrix inputs;
  std::vector<int> labels;
  std::size_t speech_begin = 0;
  std::size_t speech_length = 0;
};

LlmSequence build_sequence(const LlmParams& llm, std::span<const int> prompt, const Matrix& h,
                           std::span<const int> target);

std::size_t sequence_length(std::size_t prompt, std::size_t speech, std::size_t target);

// Rows [speech_begin, speech_begin + speech_length) of a full-sequence gradient.
Matrix speech_rows(const LlmSequence& seq, const Matrix& grad_inputs);

// Argmax decoding after [prompt; H; BOS] until EOS or max_tokens; EOS is
// not included in the result.
std::vector<int> greedy_decode(const LlmParams& llm, std::span<const int> prompt, const Matrix& h,
                               std::size_t max_tokens = 32);

}  // namespace ualign
