#include <benchmark/benchmark.h>

#include "ualign/adapter/adapter.hpp"
#include "ualign/corpus/sample.hpp"
#include "ualign/losses/ctc.hpp"
#include "ualign/losses/dtw.hpp"
#include "ualign/numerics/kernels.hpp"
#include "ualign/toyllm/llm.hpp"
#include "ualign/trainer/trainer.hpp"

using namespace ualign;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

void BM_DtwForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix h = random_matrix(n * 7 / 4, 48, 1), e = random_matrix(n, 48, 2);
  for (auto _ : state) {
    const DtwResult r = dtw_forward(cosine_distance_matrix(h, e));
    benchmark::DoNotOptimize(dtw_backward(r, h, e));
  }
}
BENCHMARK(BM_DtwForwardBackward)->Arg(4)->Arg(10)->Arg(16);

void BM_CtcForward(benchmark::State& state) {
  const auto t = static_cast<std::size_t>(state.range(0));
  const CtcSetup s = CtcSetup::from_logits(random_matrix(t, 65, 3), 64);
  std::vector<int> labels(t / 2);
  for (std::size_t k = 0; k < labels.size(); ++k) labels[k] = static_cast<int>(k % 64);
  for (auto _ : state) benchmark::DoNotOptimize(ctc_forward(s, labels).loss);
}
BENCHMARK(BM_CtcForward)->Arg(8)->Arg(28);

void BM_AdapterForwardBackward(benchmark::State& state) {
  AdapterParams p = adapter_init(AdapterConfig{}, Rng(4));
  const Matrix x = random_matrix(static_cast<std::size_t>(state.range(0)), 16, 5);
  for (auto _ : state) {
    AdapterOutput out = adapter_forward(p, x);
    benchmark::DoNotOptimize(adapter_backward(p, out.tape, out.embeddings));
  }
}
BENCHMARK(BM_AdapterForwardBackward)->Arg(20)->Arg(56);

void BM_LlmForwardBackward(benchmark::State& state) {
  const LlmParams llm = llm_init(LlmConfig{});
  const Matrix x = random_matrix(static_cast<std::size_t>(state.range(0)), 48, 6);
  for (auto _ : state) {
    LlmOutput out = llm_forward(llm, x);
    benchmark::DoNotOptimize(llm_backward_to_inputs(llm, out.tape, out.logits));
  }
}
BENCHMARK(BM_LlmForwardBackward)->Arg(16)->Arg(48);

// One optimizer step of batch 8 per regime, against a random frozen LLM.
void BM_TrainStep(benchmark::State& state) {
  const auto regime = static_cast<Regime>(state.range(0));
  const LlmParams llm = llm_init(LlmConfig{});
  const LanguageSpec spec = language_init(1);
  const std::vector<Sample> batch = CorpusGenerator(spec, {2, 2, 2, 2}, 7).all();
  std::vector<const Sample*> ptrs;
  for (const Sample& s : batch) ptrs.push_back(&s);
  TrainConfig config;
  config.regime = regime;
  TrainState ts = TrainState::fresh(adapter_init(AdapterConfig{}, Rng(8)));
  for (auto _ : state) benchmark::DoNotOptimize(train_step(ts, llm, ptrs, regime, config).loss);
  state.SetLabel(std::string(regime_name(regime)));
}
BENCHMARK(BM_TrainStep)
    ->Arg(static_cast<int>(Regime::kUalignDtw))
    ->Arg(static_cast<int>(Regime::kUalignCtc))
    ->Arg(static_cast<int>(Regime::kAsrBased))
    ->Arg(static_cast<int>(Regime::kDirectlyMt))
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
