#pragma once

#include <cstdint>
#include <functional>

#include "ualign/corpus/language.hpp"
#include "ualign/toyllm/llm.hpp"

namespace ualign {

// Text-only training of the stand-in LLM, done once before it is frozen.
// Each example is [prompt; pseudo-speech; BOS; target] where the
// pseudo-speech is the transcript's embedding rows, each repeated
// repeat_min..repeat_max times, rescaled by a log-uniform factor in
// [scale_min, scale_max] and perturbed with isotropic noise of relative
// size `noise`. The embedding table is never updated. Examples are drawn
// fresh every step from the language spec, uniformly over the four tasks.
struct PretrainConfig {
  std::size_t steps = 12000;
  std::size_t batch_size = 8;
  double lr = 3e-3;
  int repeat_min = 1;
  int repeat_max = 3;
  double scale_min = 0.5;
  double scale_max = 2.0;
  double noise = 0.3;
  // Linear warmup over this fraction of steps, then cosine decay to lr * final_lr_fraction.
  double warmup = 0.03;
  double final_lr_fraction = 0.05;
  double clip_norm = 1.0;
  std::uint64_t seed = 2024;
};

// Learning rate of a step under the warmup/cosine schedule.
double pretrain_lr(const PretrainConfig& config, std::size_t step);

using PretrainProgress = std::function<void(std::size_t step, double mean_loss)>;

LlmParams pretrain_llm(LlmParams llm, const LanguageSpec& spec, const PretrainConfig& config,
                       const PretrainProgress& progress = {});

// Pseudo-speech rows for a transcript, as used by pretrain_llm.
Matrix pseudo_speech(const LlmParams& llm, std::span<const int> tokens, const PretrainConfig& config,
                     Rng& rng);

}  // namespace ualign
