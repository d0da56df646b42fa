#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ualign/corpus/sample.hpp"
#include "ualign/numerics/error.hpp"

namespace ualign {

// Staged data pipeline: augment -> filter -> translate -> synthesize.
// Providers are pluggable; the mocks below are deterministic stand-ins for
// LLM rewriting, translation and TTS services.
enum class StageKind { kAugment = 0, kFilter = 1, kTranslate = 2, kSynthesize = 3 };

std::string_view stage_kind_name(StageKind kind);

struct Provenance {
  std::string source_id;   // id of the record this stage consumed
  std::string stage;
  std::uint64_t seed = 0;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Record {
  std::string id;
  Task task = Task::kAsr;
  std::vector<int> tokens;
  std::vector<int> target;
  std::optional<Rendering> speech;
  std::vector<Provenance> provenance;
};

// Thrown by a provider to mark the current record as failed.
class ProviderError : public Error {
 public:
  using Error::Error;
};

struct StageOutput {
  std::vector<Record> records;
  std::string drop_reason;   // set when a filter rejects the record
};

class PipelineStage {
 public:
  virtual ~PipelineStage() = default;
  virtual StageKind kind() const = 0;
  virtual std::string provider() const = 0;
  virtual StageOutput process(const Record& in, Rng& rng) const = 0;
};

struct StageStats {
  std::string stage;
  std::string provider;
  std::size_t in = 0, out = 0, dropped = 0, failed = 0;
  std::map<std::string, std::size_t> reasons;
};

struct FailedRecord {
  std::string id;
  std::string stage;
  std::string reason;
};

struct PipelineManifest {
  std::uint64_t seed = 0;
  std::size_t input = 0;
  std::size_t output = 0;
  std::vector<StageStats> stages;
  std::vector<FailedRecord> failures;

  std::string to_json() const;
};

// Runs every input record through the stages depth-first, so only one
// record's fan-out is in flight at a time. Each stage sees an Rng seeded
// from (seed, stage, record id), and every emitted record gains one
// provenance entry per stage. Stages must appear in canonical order.
PipelineManifest pipeline_run(const std::vector<std::unique_ptr<PipelineStage>>& stages,
                              const std::function<std::optional<Record>()>& source,
                              const std::function<void(Record&&)>& sink, std::uint64_t seed);

// Convenience overload over an in-memory input list.
PipelineManifest pipeline_run(const std::vector<std::unique_ptr<PipelineStage>>& stages,
                              const std::vector<Record>& input, std::vector<Record>& output,
                              std::uint64_t seed);

// Text-only source records ("src-<k>"), tasks interleaved as in CorpusGenerator.
std::vector<Record> source_records(const LanguageSpec& spec, TaskCounts counts, std::uint64_t seed);

// Converts a synthesized record; throws when it carries no speech.
Sample record_to_sample(const Record& record);

// Passes records through unchanged.
class IdentityStage : public PipelineStage {
 public:
  explicit IdentityStage(StageKind kind) : kind_(kind) {}
  StageKind kind() const override { return kind_; }
  std::string provider() const override { return "identity"; }
  StageOutput process(const Record& in, Rng& rng) const override;

 private:
  StageKind kind_;
};

// Emits `fan_out` variants per record, each with one or two edits
// (substitute, insert or delete) restricted to plain tokens so the task
// labels stay well defined. Fails a record with probability failure_rate.
class MockAugmenter : public PipelineStage {
 public:
  MockAugmenter(const LanguageSpec& spec, std::size_t fan_out = 10, double failure_rate = 0.0);
  StageKind kind() const override { return StageKind::kAugment; }
  std::string provider() const override { return "mock-augmenter"; }
  StageOutput process(const Record& in, Rng& rng) const override;

 private:
  const LanguageSpec* spec_;
  std::size_t fan_out_;
  double failure_rate_;
  std::vector<int> plain_;
};

// Placeholder suitability check: keeps token lengths within [min, max].
// The real criteria are not specified anywhere; this predicate only
// exercises the drop path.
class MockLengthFilter : public PipelineStage {
 public:
  explicit MockLengthFilter(std::size_t min_tokens = kMinTokens, std::size_t max_tokens = kMaxTokens)
      : min_(min_tokens), max_(max_tokens) {}
  StageKind kind() const override { return StageKind::kFilter; }
  std::string provider() const override { return "mock-length-filter"; }
  StageOutput process(const Record& in, Rng& rng) const override;

 private:
  std::size_t min_, max_;
};

// Maps plain tokens through a fixed seeded permutation of the plain tokens
// (a stand-in for translation that preserves every task label).
class MockTranslator : public PipelineStage {
 public:
  explicit MockTranslator(const LanguageSpec& spec, double failure_rate = 0.0);
  StageKind kind() const override { return StageKind::kTranslate; }
  std::string provider() const override { return "mock-translator"; }
  StageOutput process(const Record& in, Rng& rng) const override;

 private:
  const LanguageSpec* spec_;
  double failure_rate_;
  std::vector<int> mapping_;
};

// Renders speech from the acoustic prototypes.
class MockTts : public PipelineStage {
 public:
  explicit MockTts(const LanguageSpec& spec, double failure_rate = 0.0)
      : spec_(&spec), failure_rate_(failure_rate) {}
  StageKind kind() const override { return StageKind::kSynthesize; }
  std::string provider() const override { return "mock-tts"; }
  StageOutput process(const Record& in, Rng& rng) const override;

 private:
  const LanguageSpec* spec_;
  double failure_rate_;
};

struct MockPipelineOptions {
  std::size_t fan_out = 10;
  double failure_rate = 0.0;   // applied to augment, translate and synthesize
};

std::vector<std::unique_ptr<PipelineStage>> mock_pipeline(const LanguageSpec& spec,
                                                          const MockPipelineOptions& options = {});

}  // namespace ualign
