#include <sys/resource.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "doctest.h"
#include "ualign/corpus/corpus_io.hpp"
#include "ualign/corpus/language.hpp"
#include "ualign/corpus/pipeline.hpp"
#include "ualign/corpus/sample.hpp"
#include "ualign/numerics/error.hpp"
#include "ualign/numerics/kernels.hpp"

using namespace ualign;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("ualign_corpus_test_" + name);
}

long peak_rss_kb() {
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  return usage.ru_maxrss;
}

}  // namespace

TEST_CASE("language spec") {
  const LanguageSpec a = language_init(7), b = language_init(7);
  CHECK(a.digest() == b.digest());
  CHECK(a.digest() != language_init(8).digest());
  for (std::size_t r = 0; r < 64; ++r) CHECK(std::abs(norm(a.prototypes.row(r)) - 1.0) < 1e-12);
  for (std::size_t r = 0; r < 64; ++r)
    for (std::size_t q = 0; q < r; ++q) CHECK(std::abs(dot(a.prototypes.row(r), a.prototypes.row(q))) < 0.9);
  std::set<int> seen;
  for (const auto& set : a.entity_sets)
    for (int t : set) CHECK(seen.insert(t).second);
  for (int t : a.intent_triggers) CHECK(seen.insert(t).second);
  for (int t = 0; t < 64; ++t) {
    const int s = a.synonym_map[static_cast<std::size_t>(t)];
    CHECK(a.synonym_map[static_cast<std::size_t>(s)] == t);
    if (s != t) CHECK(seen.count(t) == 0);
  }
  const LanguageSpec round = LanguageSpec::from_json(a.to_json());
  CHECK(round.digest() == a.digest());
  CHECK_THROWS_AS(LanguageSpec::from_json("{}"), FormatError);
}

TEST_CASE("sample synthesis") {
  LanguageOptions quiet;
  quiet.noise_sigma = 0.0;
  const LanguageSpec spec = language_init(3, quiet);
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const Task task = kAllTasks[rng.below(4)];
    const Sample s = synth_sample(spec, task, rng.split(static_cast<std::uint64_t>(trial)), "x");
    CHECK(s.tokens.size() >= 4);
    CHECK(s.tokens.size() <= 16);
    CHECK(s.target == task_target(spec, task, s.tokens));
    // Exact prototypes at zero noise; nearest prototype recovers the alignment.
    for (std::size_t f = 0; f < s.frames(); ++f) {
      const int token = s.tokens[static_cast<std::size_t>(s.alignment[f])];
      CHECK(std::equal(s.speech.row(f).begin(), s.speech.row(f).end(),
                       spec.prototypes.row(static_cast<std::size_t>(token)).begin()));
      std::size_t best = 0;
      for (std::size_t p = 1; p < 64; ++p)
        if (dot(s.speech.row(f), spec.prototypes.row(p)) > dot(s.speech.row(f), spec.prototypes.row(best))) best = p;
      CHECK(static_cast<int>(best) == token);
    }
    CHECK(s.alignment.front() == 0);
    CHECK(s.alignment.back() == static_cast<int>(s.tokens.size()) - 1);
    for (std::size_t f = 1; f < s.frames(); ++f) CHECK(s.alignment[f] - s.alignment[f - 1] <= 1);
    if (task == Task::kNer) {
      CHECK(s.target.size() == s.tokens.size());
      for (std::size_t i = 0; i < s.tokens.size(); ++i)
        if (spec.entity_class_of(s.tokens[i]) < 0) CHECK(s.target[i] == vocab::kTagO);
    }
    if (task == Task::kSr) CHECK(task_target(spec, Task::kSr, s.target) == s.tokens);
    if (task == Task::kIc) {
      CHECK(s.target.size() == 1);
      CHECK(std::count_if(s.tokens.begin(), s.tokens.end(), [&](int t) { return spec.intent_of(t) >= 0; }) == 1);
    }
  }
}

TEST_CASE("task rules on hand-built sequences") {
  const LanguageSpec spec = language_init(5);
  const int per = spec.entity_sets[0][0], per2 = spec.entity_sets[0][1], loc = spec.entity_sets[1][0];
  int plain = 0;
  while (!spec.is_plain(plain)) ++plain;
  const std::vector<int> tokens{plain, per, per2, loc, plain};
  CHECK(task_target(spec, Task::kNer, tokens) ==
        std::vector<int>{vocab::kTagO, vocab::begin_tag(0), vocab::inside_tag(0), vocab::begin_tag(1), vocab::kTagO});
  const std::vector<int> ic{plain, spec.intent_triggers[5], spec.intent_triggers[2]};
  CHECK(task_target(spec, Task::kIc, ic) == std::vector<int>{vocab::kIntentBase + 5});
  CHECK_THROWS_AS(task_target(spec, Task::kIc, std::vector<int>{plain}), InvalidArgument);
  CHECK(vocab::tag_entity_class(vocab::inside_tag(2)) == 2);
  CHECK(vocab::tag_entity_class(vocab::kTagO) == -1);
}

TEST_CASE("corpus generation") {
  const LanguageSpec spec = language_init(1);
  const CorpusGenerator gen(spec, {10, 5, 5, 5}, 99);
  const CorpusGenerator again(spec, {10, 5, 5, 5}, 99);
  const auto a = gen.all();
  CHECK(a.size() == 25);
  CHECK(samples_digest(a) == samples_digest(again.all()));
  CHECK(gen.at(17) == a[17]);
  CHECK(samples_digest(a) != samples_digest(CorpusGenerator(spec, {10, 5, 5, 5}, 100).all()));
  std::size_t asr = 0;
  for (const Sample& s : a) asr += s.task == Task::kAsr;
  CHECK(asr == 10);
}

TEST_CASE("largest remainder split") {
  const TaskCounts c = split_counts(100, {927, 175, 648, 250});
  CHECK(c.total() == 100);
  CHECK(c.asr == 46);
  CHECK(c.ic == 9);
  CHECK(c.ner == 32);
  CHECK(c.sr == 13);
  const TaskCounts even = split_counts(7, {1, 1, 1, 1});
  CHECK(even.total() == 7);
  CHECK_THROWS_AS(split_counts(5, {0, 0, 0, 0}), InvalidArgument);
}

TEST_CASE("corpus round trip and errors") {
  const LanguageSpec spec = language_init(2);
  const auto samples = CorpusGenerator(spec, {3, 3, 3, 3}, 5).all();
  const auto path = temp_path("round.jsonl");
  corpus_write(samples, path);
  const auto back = corpus_read(path);
  CHECK(samples_digest(back) == samples_digest(samples));

  std::ifstream in(path);
  std::string first, second;
  std::getline(in, first);
  std::getline(in, second);
  in.close();
  SUBCASE("truncated line names the line") {
    std::ofstream out(path);
    out << first << '\n' << second.substr(0, second.size() / 2) << '\n';
    out.close();
    try {
      corpus_read(path);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  SUBCASE("schema violation names the field") {
    std::string bad = first;
    bad.replace(bad.find("\"T\":"), 4, "\"T\":9999,\"x\":");
    try {
      sample_from_json_line(bad, 4);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("line 4") != std::string::npos);
      CHECK(msg.find("speech_hex") != std::string::npos);
    }
    std::string no_task = first;
    no_task.replace(no_task.find("\"task\""), 6, "\"tusk\"");
    CHECK_THROWS_WITH_AS(sample_from_json_line(no_task, 1), doctest::Contains("'task'"), FormatError);
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(corpus_read(temp_path("does_not_exist.jsonl")), IoError);
}

TEST_CASE("2000-sample corpus streams without holding every matrix") {
  const LanguageSpec spec = language_init(4);
  const CorpusGenerator gen(spec, {500, 500, 500, 500}, 8);
  const auto path = temp_path("stream.jsonl");
  std::size_t speech_bytes = 0;
  const long before = peak_rss_kb();
  {
    CorpusWriter w(path);
    for (std::size_t k = 0; k < gen.size(); ++k) {
      const Sample s = gen.at(k);
      speech_bytes += s.speech.size() * sizeof(double);
      w.write(s);
    }
    w.close();
  }
  std::size_t count = 0;
  CorpusReader r(path);
  while (auto s = r.next()) ++count;
  const long grown_kb = peak_rss_kb() - before;
  CHECK(count == 2000);
  MESSAGE("speech payload " << speech_bytes / 1024 << " KiB, peak RSS growth " << grown_kb << " KiB");
  CHECK(static_cast<std::size_t>(grown_kb) * 1024 < speech_bytes / 4);
  std::filesystem::remove(path);
}

TEST_CASE("pipeline") {
  const LanguageSpec spec = language_init(6);
  SUBCASE("identity stages pass records through") {
    std::vector<std::unique_ptr<PipelineStage>> stages;
    for (StageKind k : {StageKind::kAugment, StageKind::kFilter, StageKind::kTranslate, StageKind::kSynthesize})
      stages.push_back(std::make_unique<IdentityStage>(k));
    const auto input = source_records(spec, {2, 2, 2, 1}, 3);
    std::vector<Record> output;
    const auto m = pipeline_run(stages, input, output, 1);
    REQUIRE(output.size() == input.size());
    for (std::size_t k = 0; k < input.size(); ++k) {
      CHECK(output[k].tokens == input[k].tokens);
      CHECK(output[k].id == input[k].id);
    }
    for (const auto& s : m.stages) {
      CHECK(s.in == 7);
      CHECK(s.out == 7);
    }
  }
  SUBCASE("fan-out 10 over 7 inputs with recount") {
    const auto input = source_records(spec, {2, 2, 2, 1}, 3);
    std::vector<Record> output;
    const auto stages = mock_pipeline(spec);
    const auto m = pipeline_run(stages, input, output, 11);
    CHECK(m.stages[0].out == 70);
    CHECK(m.stages[1].in == 70);
    // Independent recount: replay augmentation, count lengths in range.
    std::vector<std::unique_ptr<PipelineStage>> augment_only;
    augment_only.push_back(std::make_unique<MockAugmenter>(spec, 10));
    std::vector<Record> candidates;
    pipeline_run(augment_only, input, candidates, 11);
    REQUIRE(candidates.size() == 70);
    std::size_t keep = 0, too_long = 0, too_short = 0;
    for (const Record& r : candidates) {
      if (r.tokens.size() > 16) ++too_long;
      else if (r.tokens.size() < 4) ++too_short;
      else ++keep;
    }
    CHECK(m.stages[1].out == keep);
    CHECK(m.stages[1].dropped == too_long + too_short);
    CHECK(m.output == keep);
    CHECK(output.size() == keep);
    for (const Record& r : output) {
      REQUIRE(r.provenance.size() == 4);
      CHECK(r.provenance[0].source_id == r.id.substr(0, r.id.find('.')));
      for (std::size_t k = 1; k < 4; ++k) CHECK(r.provenance[k].source_id == r.id);
      CHECK(r.provenance[0].stage == "augment");
      CHECK(r.provenance[3].stage == "synthesize");
      const Sample s = record_to_sample(r);
      CHECK(s.target == task_target(spec, s.task, s.tokens));
    }
    std::vector<Record> again;
    const auto m2 = pipeline_run(mock_pipeline(spec), input, again, 11);
    CHECK(m2.to_json() == m.to_json());
  }
  SUBCASE("filter drops long records") {
    Record r;
    r.id = "long";
    r.tokens.assign(17, 0);
    std::vector<std::unique_ptr<PipelineStage>> stages;
    stages.push_back(std::make_unique<MockLengthFilter>());
    std::vector<Record> output;
    const auto m = pipeline_run(stages, std::vector<Record>{r}, output, 1);
    CHECK(output.empty());
    CHECK(m.stages[0].reasons.at("too_long") == 1);
  }
  SUBCASE("provider failures are counted and the run continues") {
    MockPipelineOptions options;
    options.failure_rate = 0.2;
    const auto input = source_records(spec, {5, 5, 5, 5}, 3);
    std::vector<Record> output;
    const auto m = pipeline_run(mock_pipeline(spec, options), input, output, 2);
    std::size_t failed = 0;
    for (const auto& s : m.stages) {
      failed += s.failed;
      std::size_t reasons = 0;
      for (const auto& [_, n] : s.reasons) reasons += n;
      CHECK(reasons == s.dropped + s.failed);
    }
    CHECK(failed > 0);
    CHECK(failed == m.failures.size());
    CHECK(!output.empty());
    CHECK(m.to_json().find("\"failed\"") != std::string::npos);
  }
  SUBCASE("stages out of order are rejected") {
    std::vector<std::unique_ptr<PipelineStage>> stages;
    stages.push_back(std::make_unique<MockLengthFilter>());
    stages.push_back(std::make_unique<MockAugmenter>(spec));
    std::vector<Record> output;
    CHECK_THROWS_AS(pipeline_run(stages, std::vector<Record>{}, output, 1), InvalidArgument);
  }
}
