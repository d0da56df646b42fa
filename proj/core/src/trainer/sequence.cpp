#include "ualign/trainer/sequence.hpp"

#include <algorithm>

#include "ualign/corpus/vocab.hpp"
#include "ualign/numerics/error.hpp"

namespace ualign {

std::size_t sequence_length(std::size_t prompt, std::size_t speech, std::size_t target) {
  return prompt + speech + 1 + target;
}

namespace {

void copy_rows(const Matrix& src, Matrix& dst, std::size_t at) {
  for (std::size_t r = 0; r < src.rows(); ++r) {
    std::copy(src.row(r).begin(), src.row(r).end(), dst.row(at + r).begin());
  }
}

Matrix prefix_inputs(const LlmParams& llm, std::span<const int> prompt, const Matrix& h,
                     std::size_t extra_rows) {
  const std::size_t d = llm.config().d_model;
  if (h.cols() != d) {
    throw ShapeError("speech embeddings are " + h.shape_string() + " but the LLM width is " +
                     std::to_string(d));
  }
  Matrix x(prompt.size() + h.rows() + 1 + extra_rows, d);
  copy_rows(embed_tokens(llm, prompt), x, 0);
  copy_rows(h, x, prompt.size());
  const int bos = vocab::kBos;
  copy_rows(embed_tokens(llm, std::span<const int>(&bos, 1)), x, prompt.size() + h.rows());
  return x;
}

}  // namespace

LlmSequence build_sequence(const LlmParams& llm, std::span<const int> prompt, const Matrix& h,
                           std::span<const int> target) {
  LlmSequence seq;
  seq.inputs = prefix_inputs(llm, prompt, h, target.size());
  copy_rows(embed_tokens(llm, target), seq.inputs, prompt.size() + h.rows() + 1);
  seq.speech_begin = prompt.size();
  seq.speech_length = h.rows();
  seq.labels.assign(seq.inputs.rows(), LlmSequence::kIgnore);
  const std::size_t bos = prompt.size() + h.rows();
  for (std::size_t k = 0; k < target.size(); ++k) seq.labels[bos + k] = target[k];
  seq.labels[bos + target.size()] = vocab::kEos;
  return seq;
}

Matrix speech_rows(const LlmSequence& seq, const Matrix& grad_inputs) {
  Matrix out(seq.speech_length, grad_inputs.cols());
  for (std::size_t r = 0; r < seq.speech_length; ++r) {
    const auto src = grad_inputs.row(seq.speech_begin + r);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

std::vector<int> greedy_decode(const LlmParams& llm, std::span<const int> prompt, const Matrix& h,
                               std::size_t max_tokens) {
  const std::size_t limit = llm.config().max_len;
  Matrix x = prefix_inputs(llm, prompt, h, 0);
  const Matrix table = llm.embedding_table();
  std::vector<int> out;
  while (out.size() < max_tokens && x.rows() <= limit) {
    const Matrix logits = llm_forward(llm, x).logits;
    const auto last = logits.row(logits.rows() - 1);
    const int next = static_cast<int>(std::max_element(last.begin(), last.end()) - last.begin());
    if (next == vocab::kEos) break;
    out.push_back(next);
    if (x.rows() == limit) break;
    Matrix grown(x.rows() + 1, x.cols());
    std::copy(x.values().begin(), x.values().end(), grown.values().begin());
    const auto row = table.row(static_cast<std::size_t>(next));
    std::copy(row.begin(), row.end(), grown.row(x.rows()).begin());
    x = std::move(grown);
  }
  return out;
}

}  // namespace ualign
