#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ualign/adapter/adapter.hpp"
#include "ualign/corpus/sample.hpp"
#include "ualign/toyllm/llm.hpp"
#include "ualign/trainer/adam.hpp"
#include "ualign/trainer/flops.hpp"
#include "ualign/trainer/metrics.hpp"

namespace ualign {

// ualign_dtw, ualign_ctc and asr_based are alignment (stage-1) regimes;
// stage2 is multitask fine-tuning from an initial adapter; directly_mt is
// multitask fine-tuning from a fresh adapter.
enum class Regime { kUalignDtw, kUalignCtc, kAsrBased, kDirectlyMt, kStage2 };

std::string_view regime_name(Regime regime);
Regime parse_regime(std::string_view name);
bool is_alignment_regime(Regime regime);

struct TrainConfig {
  Regime regime = Regime::kUalignDtw;
  std::size_t epochs = 3;
  std::size_t batch_size = 8;
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::size_t eval_every = 0;          // steps between evaluations; 0 = epoch ends only
  std::vector<Task> tasks{kAllTasks.begin(), kAllTasks.end()};   // multitask mix

  void validate() const;
};

struct EvalOptions {
  std::size_t max_decode = 32;
  bool decode = true;       // task metrics (greedy decoding through the LLM)
  bool alignment = true;    // along-path cosine and DTW loss
};

MetricsReport evaluate(const AdapterParams& adapter, const LlmParams& llm,
                       std::span<const Sample> samples, const EvalOptions& options = {});

// Along-path mean cosine similarity between H and E, and the DTW loss.
std::pair<double, double> alignment_score(const Matrix& h, const Matrix& e);

struct CurvePoint {
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  std::uint64_t flops = 0;
  double train_loss = 0.0;   // mean training loss since the previous point
  MetricsReport metrics;
};

// Everything needed to continue a run bit for bit.
struct TrainState {
  AdapterParams adapter;
  AdamState adam;
  FlopLedger ledger;
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;           // completed epochs of the current run
  double loss_sum = 0.0;             // since the last curve point
  std::uint64_t loss_count = 0;
  std::uint64_t skipped = 0;
  std::vector<CurvePoint> curve;

  static TrainState fresh(AdapterParams adapter);
};

struct StepStats {
  double loss = 0.0;        // mean over counted samples
  std::size_t counted = 0;
  std::size_t skipped = 0;
};

// One optimizer step over `batch` under `regime`. The LLM is read-only.
StepStats train_step(TrainState& state, const LlmParams& llm, std::span<const Sample* const> batch,
                     Regime regime, const TrainConfig& config);

// Per-sample loss and adapter gradient (accumulated into state.adapter),
// charging the ledger. Returns false when the sample cannot be used.
bool sample_loss(TrainState& state, const LlmParams& llm, const Sample& sample, Regime regime,
                 const TrainConfig& config, double& loss);

using EvalHook = std::function<void(TrainState&)>;

// Runs config.epochs epochs (continuing from state.epoch). `on_eval` fires
// every config.eval_every steps and at each epoch end; `on_epoch` fires
// after each epoch.
void train_epochs(TrainState& state, const LlmParams& llm, std::span<const Sample> corpus,
                  const TrainConfig& config, const EvalHook& on_eval, const EvalHook& on_epoch);

// Appends a curve point evaluated on `eval` and resets the loss window.
void record_curve_point(TrainState& state, const AdapterParams& adapter, const LlmParams& llm,
                        std::span<const Sample> eval, const EvalOptions& options);

std::string curve_to_csv(std::span<const CurvePoint> curve);

inline constexpr const char* kTrainStateSection = "train_state";

void save_train_state(const TrainState& state, const std::filesystem::path& path);
TrainState load_train_state(const std::filesystem::path& path);

// Adapter weights from either an adapter checkpoint or a train state.
AdapterParams load_adapter(const std::filesystem::path& path);

// The 64 language-token rows of the LLM embedding table (CTC head vocabulary).
Matrix language_table(const LlmParams& llm);

}  // namespace ualign
