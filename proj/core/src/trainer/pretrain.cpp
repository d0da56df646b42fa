#include "ualign/trainer/pretrain.hpp"

#include <cmath>
#include <numbers>

#include "ualign/corpus/sample.hpp"
#include "ualign/losses/cross_entropy.hpp"
#include "ualign/numerics/error.hpp"
#include "ualign/trainer/adam.hpp"
#include "ualign/trainer/sequence.hpp"

namespace ualign {

Matrix pseudo_speech(const LlmParams& llm, std::span<const int> tokens, const PretrainConfig& config,
                     Rng& rng) {
  const Matrix e = embed_tokens(llm, tokens);
  const std::size_t d = e.cols();
  std::vector<std::size_t> source;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const int repeats = rng.range(config.repeat_min, config.repeat_max);
    source.insert(source.end(), static_cast<std::size_t>(repeats), i);
  }
  Matrix out(source.size(), d);
  const double log_lo = std::log(config.scale_min), log_hi = std::log(config.scale_max);
  const double sigma = config.noise / std::sqrt(static_cast<double>(d));
  for (std::size_t r = 0; r < source.size(); ++r) {
    const double scale = std::exp(rng.uniform(log_lo, log_hi));
    const auto src = e.row(source[r]);
    auto dst = out.row(r);
    for (std::size_t k = 0; k < d; ++k) dst[k] = scale * (src[k] + sigma * rng.normal());
  }
  return out;
}

double pretrain_lr(const PretrainConfig& config, std::size_t step) {
  const double n = static_cast<double>(config.steps);
  const double t = static_cast<double>(step) + 1.0;
  const double warm = config.warmup * n;
  if (t <= warm) return config.lr * t / warm;
  const double progress = n > warm ? (t - warm) / (n - warm) : 1.0;
  const double floor = config.final_lr_fraction;
  return config.lr * (floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
}

LlmParams pretrain_llm(LlmParams llm, const LanguageSpec& spec, const PretrainConfig& config,
                       const PretrainProgress& progress) {
  if (config.batch_size < 1 || config.repeat_min < 1 || config.repeat_max < config.repeat_min ||
      !(config.scale_min > 0.0) || config.scale_max < config.scale_min || !(config.lr > 0.0) ||
      config.warmup < 0.0 || config.warmup >= 1.0 || config.final_lr_fraction < 0.0 ||
      config.final_lr_fraction > 1.0 || config.noise < 0.0) {
    throw InvalidArgument("pretrain config is inconsistent");
  }
  AdamConfig adam;
  adam.lr = config.lr;
  adam.clip_norm = config.clip_norm;
  std::span<Tensor> all = llm.mutable_tensors();
  std::span<Tensor> trained = all.subspan(1);   // everything but the embedding table
  AdamState state = adam_init(trained);
  std::vector<Tensor> grads = LlmParams::layout(llm.config());
  const Rng root = Rng(config.seed).split("pretrain");
  double window = 0.0;
  std::size_t window_count = 0;
  for (std::size_t step = 0; step < config.steps; ++step) {
    zero_grads(grads);
    Rng rng = root.split(step);
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const Task task = kAllTasks[rng.below(kAllTasks.size())];
      const std::vector<int> tokens = draw_tokens(spec, task, rng);
      const std::vector<int> target = task_target(spec, task, tokens);
      const Matrix speech = pseudo_speech(llm, tokens, config, rng);
      const auto prompt = prompt_tokens(task);
      const LlmSequence seq = build_sequence(llm, prompt, speech, target);
      LlmOutput out = llm_forward(llm, seq.inputs);
      const CrossEntropyResult ce = cross_entropy(out.logits, seq.labels, LlmSequence::kIgnore);
      llm_backward(llm, out.tape, ce.grad, grads);
      window += ce.loss;
      ++window_count;
    }
    const double inv = 1.0 / static_cast<double>(config.batch_size);
    for (std::size_t k = 1; k < all.size(); ++k) {
      for (std::size_t i = 0; i < all[k].numel(); ++i) all[k].grad[i] = grads[k].grad[i] * inv;
    }
    adam.lr = pretrain_lr(config, step);
    adam_step(trained, state, adam);
    if (progress && ((step + 1) % 100 == 0 || step + 1 == config.steps)) {
      progress(step + 1, window / static_cast<double>(window_count));
      window = 0.0;
      window_count = 0;
    }
  }
  for (Tensor& t : all) t.zero_grad();
  return llm;
}

}  // namespace ualign
