#include "ualign/corpus/pipeline.hpp"

#include <algorithm>
#include <cstdio>

#include "json.hpp"

namespace ualign {

std::string_view stage_kind_name(StageKind kind) {
  switch (kind) {
    case StageKind::kAugment: return "augment";
    case StageKind::kFilter: return "filter";
    case StageKind::kTranslate: return "translate";
    case StageKind::kSynthesize: return "synthesize";
  }
  return "?";
}

std::string PipelineManifest::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["input"] = input;
  j["output"] = output;
  auto& stages_json = j["stages"] = nlohmann::ordered_json::array();
  for (const StageStats& s : stages) {
    nlohmann::ordered_json e;
    e["stage"] = s.stage;
    e["provider"] = s.provider;
    e["in"] = s.in;
    e["out"] = s.out;
    e["dropped"] = s.dropped;
    e["failed"] = s.failed;
    e["reasons"] = nlohmann::ordered_json::object();
    for (const auto& [reason, count] : s.reasons) e["reasons"][reason] = count;
    stages_json.push_back(std::move(e));
  }
  auto& failures_json = j["failures"] = nlohmann::ordered_json::array();
  for (const FailedRecord& f : failures)
    failures_json.push_back({{"id", f.id}, {"stage", f.stage}, {"reason", f.reason}});
  return j.dump(2);
}

namespace {

struct Runner {
  const std::vector<std::unique_ptr<PipelineStage>>& stages;
  const std::function<void(Record&&)>& sink;
  PipelineManifest& manifest;
  Rng root;

  void push(const Record& record, std::size_t depth) {
    if (depth == stages.size()) {
      ++manifest.output;
      Record copy = record;
      sink(std::move(copy));
      return;
    }
    const PipelineStage& stage = *stages[depth];
    StageStats& stats = manifest.stages[depth];
    ++stats.in;
    const std::uint64_t seed = root.split(stats.stage).split(record.id).next_u64();
    Rng rng(seed);
    StageOutput out;
    try {
      out = stage.process(record, rng);
    } catch (const ProviderError& e) {
      ++stats.failed;
      ++stats.reasons[std::string("failed: ") + e.what()];
      manifest.failures.push_back({record.id, stats.stage, e.what()});
      return;
    }
    if (out.records.empty()) {
      ++stats.dropped;
      ++stats.reasons[out.drop_reason.empty() ? "dropped" : out.drop_reason];
      return;
    }
    for (Record& r : out.records) {
      r.provenance = record.provenance;
      r.provenance.push_back({record.id, stats.stage, seed});
      ++stats.out;
      push(r, depth + 1);
    }
  }
};

}  // namespace

PipelineManifest pipeline_run(const std::vector<std::unique_ptr<PipelineStage>>& stages,
                              const std::function<std::optional<Record>()>& source,
                              const std::function<void(Record&&)>& sink, std::uint64_t seed) {
  for (std::size_t k = 1; k < stages.size(); ++k) {
    if (static_cast<int>(stages[k]->kind()) <= static_cast<int>(stages[k - 1]->kind())) {
      throw InvalidArgument("pipeline stage '" + std::string(stage_kind_name(stages[k]->kind())) +
                            "' cannot follow '" +
                            std::string(stage_kind_name(stages[k - 1]->kind())) +
                            "' (order is augment, filter, translate, synthesize)");
    }
  }
  PipelineManifest manifest;
  manifest.seed = seed;
  for (const auto& s : stages) {
    StageStats stats;
    stats.stage = stage_kind_name(s->kind());
    stats.provider = s->provider();
    manifest.stages.push_back(std::move(stats));
  }
  Runner runner{stages, sink, manifest, Rng(seed).split("pipeline")};
  while (auto record = source()) {
    ++manifest.input;
    runner.push(*record, 0);
  }
  return manifest;
}

PipelineManifest pipeline_run(const std::vector<std::unique_ptr<PipelineStage>>& stages,
                              const std::vector<Record>& input, std::vector<Record>& output,
                              std::uint64_t seed) {
  std::size_t next = 0;
  return pipeline_run(
      stages,
      [&]() -> std::optional<Record> {
        if (next == input.size()) return std::nullopt;
        return input[next++];
      },
      [&](Record&& r) { output.push_back(std::move(r)); }, seed);
}

std::vector<Record> source_records(const LanguageSpec& spec, TaskCounts counts, std::uint64_t seed) {
  std::vector<Task> tasks;
  for (Task t : kAllTasks) tasks.insert(tasks.end(), counts.of(t), t);
  const Rng root = Rng(seed).split("source");
  Rng order = root.split("order");
  order.shuffle(tasks);
  std::vector<Record> out;
  out.reserve(tasks.size());
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    Rng rng = root.split(static_cast<std::uint64_t>(k));
    Record r;
    char id[32];
    std::snprintf(id, sizeof id, "src-%06zu", k);
    r.id = id;
    r.task = tasks[k];
    r.tokens = draw_tokens(spec, r.task, rng);
    r.target = task_target(spec, r.task, r.tokens);
    out.push_back(std::move(r));
  }
  return out;
}

Sample record_to_sample(const Record& record) {
  if (!record.speech) throw InvalidArgument("record '" + record.id + "' has no rendered speech");
  Sample s;
  s.id = record.id;
  s.task = record.task;
  s.tokens = record.tokens;
  s.speech = record.speech->speech;
  s.alignment = record.speech->alignment;
  s.target = record.target;
  return s;
}

StageOutput IdentityStage::process(const Record& in, Rng&) const { return {{in}, {}}; }

namespace {

std::vector<int> plain_tokens(const LanguageSpec& spec) {
  std::vector<int> out;
  for (int t = 0; t < vocab::kLanguageTokens; ++t)
    if (spec.is_plain(t)) out.push_back(t);
  return out;
}

void maybe_fail(double rate, Rng& rng, const char* what) {
  if (rate > 0.0 && rng.uniform() < rate) throw ProviderError(what);
}

}  // namespace

MockAugmenter::MockAugmenter(const LanguageSpec& spec, std::size_t fan_out, double failure_rate)
    : spec_(&spec), fan_out_(fan_out), failure_rate_(failure_rate), plain_(plain_tokens(spec)) {
  if (fan_out_ == 0) throw InvalidArgument("MockAugmenter: fan_out must be >= 1");
}

StageOutput MockAugmenter::process(const Record& in, Rng& rng) const {
  maybe_fail(failure_rate_, rng, "augmenter unavailable");
  StageOutput out;
  for (std::size_t v = 0; v < fan_out_; ++v) {
    Record r = in;
    r.id = in.id + ".a" + std::to_string(v);
    const int edits = rng.range(1, 2);
    for (int e = 0; e < edits; ++e) {
      std::vector<std::size_t> plain_positions;
      for (std::size_t i = 0; i < r.tokens.size(); ++i)
        if (spec_->is_plain(r.tokens[i])) plain_positions.push_back(i);
      const auto op = rng.below(3);
      const int fresh = plain_[rng.below(plain_.size())];
      if (op == 0 && !plain_positions.empty()) {
        r.tokens[plain_positions[rng.below(plain_positions.size())]] = fresh;
      } else if (op == 1 || plain_positions.empty()) {
        r.tokens.insert(r.tokens.begin() + static_cast<std::ptrdiff_t>(rng.below(r.tokens.size() + 1)),
                        fresh);
      } else {
        r.tokens.erase(r.tokens.begin() +
                       static_cast<std::ptrdiff_t>(plain_positions[rng.below(plain_positions.size())]));
      }
    }
    r.target = task_target(*spec_, r.task, r.tokens);
    out.records.push_back(std::move(r));
  }
  return out;
}

StageOutput MockLengthFilter::process(const Record& in, Rng&) const {
  if (in.tokens.size() < min_) return {{}, "too_short"};
  if (in.tokens.size() > max_) return {{}, "too_long"};
  return {{in}, {}};
}

MockTranslator::MockTranslator(const LanguageSpec& spec, double failure_rate)
    : spec_(&spec), failure_rate_(failure_rate) {
  mapping_.resize(vocab::kLanguageTokens);
  for (int t = 0; t < vocab::kLanguageTokens; ++t) mapping_[static_cast<std::size_t>(t)] = t;
  std::vector<int> plain = plain_tokens(spec), shuffled = plain;
  Rng(spec.seed).split("translator").shuffle(shuffled);
  for (std::size_t k = 0; k < plain.size(); ++k) mapping_[static_cast<std::size_t>(plain[k])] = shuffled[k];
}

StageOutput MockTranslator::process(const Record& in, Rng& rng) const {
  maybe_fail(failure_rate_, rng, "translator unavailable");
  Record r = in;
  for (int& t : r.tokens) t = mapping_[static_cast<std::size_t>(t)];
  r.target = task_target(*spec_, r.task, r.tokens);
  return {{std::move(r)}, {}};
}

StageOutput MockTts::process(const Record& in, Rng& rng) const {
  maybe_fail(failure_rate_, rng, "tts unavailable");
  Record r = in;
  Rng speech_rng = rng.split("speech");
  r.speech = render_speech(*spec_, r.tokens, speech_rng);
  return {{std::move(r)}, {}};
}

std::vector<std::unique_ptr<PipelineStage>> mock_pipeline(const LanguageSpec& spec,
                                                          const MockPipelineOptions& options) {
  std::vector<std::unique_ptr<PipelineStage>> stages;
  stages.push_back(std::make_unique<MockAugmenter>(spec, options.fan_out, options.failure_rate));
  stages.push_back(std::make_unique<MockLengthFilter>());
  stages.push_back(std::make_unique<MockTranslator>(spec, options.failure_rate));
  stages.push_back(std::make_unique<MockTts>(spec, options.failure_rate));
  return stages;
}

}  // namespace ualign
