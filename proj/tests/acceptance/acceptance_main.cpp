// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Usage: acceptance <frozen-llm.ualn>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ualign/corpus/pipeline.hpp"
#include "ualign/oracle/suites.hpp"
#include "ualign/trainer/trainer.hpp"

using namespace ualign;
namespace fs = std::filesystem;

namespace {

// Protocol constants, frozen after the oracle runs.
constexpr std::size_t kTrainSamples = 2000;
constexpr std::size_t kEvalPerTask = 100;
constexpr std::uint64_t kEvalSeed = 777;
constexpr std::uint64_t kSpecSeed = 1;
constexpr std::size_t kStageEpochs = 3;
constexpr double kStage1Lr = 1e-3;
constexpr double kMultitaskLr = 3e-4;
constexpr std::uint64_t kSeeds[] = {1, 2, 3, 4, 5};
constexpr std::size_t kSeedsRequired = 4;
constexpr double kInitCosineBound = 0.15;
constexpr double kTrainedCosineFloor = 0.8;
constexpr double kFlopRatioFloor = 3.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  int id;
  std::string name;
  bool pass;
  std::string detail;
};

std::vector<Verdict> verdicts;

void record(int id, std::string name, bool pass, std::string detail) {
  std::printf("%s criterion %d (%s): %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  verdicts.push_back({id, std::move(name), pass, std::move(detail)});
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

void progress(const std::string& line) {
  std::fprintf(stderr, "[acceptance] %s\n", line.c_str());
  std::fflush(stderr);
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---------------------------------------------------------------- oracles

void oracle_criteria() {
  auto t0 = Clock::now();
  const auto dtw = oracle::dtw_suite(500, 1);
  double dt = seconds_since(t0);
  record(1, "DTW oracle equivalence", dtw.passed() && dtw.trials >= 500 && dt < 10.0,
         dtw.summary() + fmt(", %.2f s (limit 10 s)", dt));

  t0 = Clock::now();
  const auto ctc = oracle::ctc_suite(200, 2);
  dt = seconds_since(t0);
  record(2, "CTC oracle equivalence", ctc.passed() && ctc.trials >= 200 && dt < 30.0,
         ctc.summary() + fmt(", %.2f s (limit 30 s)", dt));

  t0 = Clock::now();
  const auto grads = oracle::grad_suites(3);
  dt = seconds_since(t0);
  bool ok = dt < 60.0;
  std::string detail;
  for (const auto& r : grads) {
    ok = ok && r.passed();
    detail += (detail.empty() ? "" : "; ") + r.summary();
  }
  record(3, "gradient suites", ok, detail + fmt("; %.2f s (limit 60 s)", dt));
}

// ---------------------------------------------------------------- training protocol

struct RegimeRun {
  Regime stage1 = Regime::kUalignDtw;
  std::vector<CurvePoint> curve;   // stage 1 then stage 2, cumulative FLOPs
  MetricsReport final_metrics;
  double stage1_cosine = 0.0;
  FlopLedger stage1_ledger;
  std::uint64_t stage1_steps = 0;
  double stage1_seconds = 0.0;
  std::string state_bytes;   // serialized final train state
  std::string report_json;
  std::string curve_csv;
};

struct Fixture {
  const LlmParams* llm;
  std::vector<Sample> train, eval;
  AdapterConfig adapter;
  std::uint64_t seed;
};

const char* short_name(Regime r) {
  switch (r) {
    case Regime::kUalignDtw: return "ualign_dtw";
    case Regime::kUalignCtc: return "ualign_ctc";
    case Regime::kAsrBased: return "asr_based";
    default: return "directly_mt";
  }
}

RegimeRun run_regime(const Fixture& fx, Regime regime) {
  RegimeRun out;
  out.stage1 = regime;
  const EvalOptions eval_options;
  TrainConfig config;
  config.seed = fx.seed;
  config.epochs = kStageEpochs;
  TrainState state = TrainState::fresh(adapter_init(fx.adapter, Rng(fx.seed).split("adapter")));
  auto on_eval = [&](TrainState& s) { record_curve_point(s, s.adapter, *fx.llm, fx.eval, eval_options); };

  if (regime == Regime::kDirectlyMt) {
    // Same number of passes over the data as the two-stage regimes.
    config.regime = Regime::kDirectlyMt;
    config.epochs = 2 * kStageEpochs;
    config.adam.lr = kMultitaskLr;
    train_epochs(state, *fx.llm, fx.train, config, on_eval, {});
  } else {
    const auto t0 = Clock::now();
    config.regime = regime;
    config.adam.lr = kStage1Lr;
    train_epochs(state, *fx.llm, fx.train, config, on_eval, {});
    out.stage1_seconds = seconds_since(t0);
    out.stage1_cosine = state.curve.back().metrics.alignment_cosine;
    out.stage1_ledger = state.ledger;
    out.stage1_steps = state.step;

    TrainState stage2 = TrainState::fresh(state.adapter);
    stage2.ledger = state.ledger;
    stage2.curve = state.curve;
    state = std::move(stage2);
    config.regime = Regime::kStage2;
    config.adam.lr = kMultitaskLr;
    train_epochs(state, *fx.llm, fx.train, config, on_eval, {});
  }
  out.curve = state.curve;
  out.final_metrics = state.curve.back().metrics;
  out.report_json = out.final_metrics.to_json();
  out.curve_csv = curve_to_csv(state.curve);
  const fs::path tmp = fs::temp_directory_path() / ("ualign-acceptance-" + std::to_string(::getpid()) + ".ualn");
  save_train_state(state, tmp);
  out.state_bytes = read_bytes(tmp);
  fs::remove(tmp);

  const MetricsReport& m = out.final_metrics;
  progress(std::string("seed ") + std::to_string(fx.seed) + " " + short_name(regime) + fmt(": IC %.3f", m.ic_accuracy) +
           fmt(" NER-ALL %.3f", m.ner_all) + fmt(" CER %.3f", m.asr_cer) + fmt(" cos %.3f", m.alignment_cosine) +
           fmt(" GFLOP %.1f", static_cast<double>(m.flops) / 1e9));
  return out;
}

Fixture make_fixture(const LlmParams& llm, const LanguageSpec& spec, std::uint64_t seed) {
  Fixture fx;
  fx.llm = &llm;
  fx.seed = seed;
  const std::size_t q = kTrainSamples / 4;
  fx.train = CorpusGenerator(spec, {q, q, q, q}, seed, "tr").all();
  fx.eval = CorpusGenerator(spec, {kEvalPerTask, kEvalPerTask, kEvalPerTask, kEvalPerTask}, kEvalSeed, "ev").all();
  fx.adapter.in_dim = spec.options.in_dim;
  fx.adapter.out_dim = llm.config().d_model;
  return fx;
}

// ---------------------------------------------------------------- criterion 5 helpers

// Value of a step curve at x: the last point at or before x.
double step_value(const std::vector<std::pair<double, double>>& curve, double x) {
  double v = curve.front().second;
  for (const auto& [fx, fy] : curve) {
    if (fx > x) break;
    v = fy;
  }
  return v;
}

std::vector<std::pair<double, double>> cer_curve(const RegimeRun& r) {
  std::vector<std::pair<double, double>> c;
  for (const CurvePoint& p : r.curve) c.emplace_back(static_cast<double>(p.flops), p.metrics.asr_cer);
  return c;
}

// ---------------------------------------------------------------- criterion 8

struct RecountResult {
  bool ok = true;
  std::string detail;
  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

// Recomputes every manifest count from the emitted records and checks the
// stage-to-stage flow.
RecountResult recount(const PipelineManifest& m, const std::vector<Record>& input, const std::vector<Record>& output,
                      std::size_t fan_out) {
  RecountResult r;
  if (m.input != input.size()) r.fail("manifest input != source records");
  if (m.output != output.size()) r.fail("manifest output != emitted records");
  if (m.stages.size() != 4) r.fail("expected four stages");
  std::size_t failed_total = 0;
  for (std::size_t k = 0; k < m.stages.size(); ++k) {
    const StageStats& s = m.stages[k];
    const std::size_t expected_in = k == 0 ? m.input : m.stages[k - 1].out;
    if (s.in != expected_in) r.fail("stage " + s.stage + ": in != previous out");
    // Provider failures are listed under "failed: <what>", filter drops under their own reason.
    std::size_t drop_reasons = 0, fail_reasons = 0;
    for (const auto& [reason, n] : s.reasons) (reason.rfind("failed: ", 0) == 0 ? fail_reasons : drop_reasons) += n;
    if (drop_reasons != s.dropped) r.fail("stage " + s.stage + ": drop reasons do not sum to dropped");
    if (fail_reasons != s.failed) r.fail("stage " + s.stage + ": failure reasons do not sum to failed");
    if (k == 0) {
      if (s.out != (s.in - s.failed - s.dropped) * fan_out) r.fail("augment: out != surviving inputs x fan-out");
    } else if (s.in != s.out + s.dropped + s.failed) {
      r.fail("stage " + s.stage + ": in != out + dropped + failed");
    }
    failed_total += s.failed;
  }
  if (!m.stages.empty() && m.stages.back().out != m.output) r.fail("last stage out != manifest output");
  if (m.failures.size() != failed_total) r.fail("failure list size != sum of failed counts");

  std::set<std::string> sources;
  for (const Record& rec : input) sources.insert(rec.id);
  std::set<std::string> ids;
  const char* order[] = {"augment", "filter", "translate", "synthesize"};
  for (const Record& rec : output) {
    if (!ids.insert(rec.id).second) r.fail("duplicate record id " + rec.id);
    if (!rec.speech) r.fail(rec.id + ": no speech");
    if (rec.provenance.size() != 4) {
      r.fail(rec.id + ": provenance chain has " + std::to_string(rec.provenance.size()) + " entries");
      continue;
    }
    for (std::size_t k = 0; k < 4; ++k)
      if (rec.provenance[k].stage != order[k]) r.fail(rec.id + ": stage order broken");
    const std::string& root = rec.provenance[0].source_id;
    if (!sources.count(root)) r.fail(rec.id + ": chain does not start at a source record");
    if (rec.id.rfind(root + ".", 0) != 0) r.fail(rec.id + ": id does not descend from " + root);
    for (std::size_t k = 1; k < 4; ++k)
      if (rec.provenance[k].source_id != rec.id) r.fail(rec.id + ": broken link at " + order[k]);
  }
  if (r.ok) r.detail = "all counts recomputed";
  return r;
}

void pipeline_criterion(const LanguageSpec& spec) {
  const std::size_t inputs = 7, fan_out = 10;
  const TaskCounts counts = split_counts(inputs, {927, 175, 648, 250});
  const std::vector<Record> input = source_records(spec, counts, 11);
  bool ok = true;
  std::string detail;
  for (double failure_rate : {0.0, 0.2}) {
    MockPipelineOptions opts;
    opts.fan_out = fan_out;
    opts.failure_rate = failure_rate;
    std::vector<Record> output;
    const PipelineManifest m = pipeline_run(mock_pipeline(spec, opts), input, output, 11);
    const RecountResult rc = recount(m, input, output, fan_out);
    const std::size_t candidates = m.stages.size() > 1 ? m.stages[1].in : 0;
    ok = ok && rc.ok;
    if (failure_rate == 0.0) ok = ok && candidates == inputs * fan_out;
    detail += (detail.empty() ? "" : "; ") + fmt("failure rate %.1f: ", failure_rate) + std::to_string(candidates) +
              " pre-filter candidates, " + std::to_string(m.output) + " survivors, " + rc.detail;
  }
  record(8, "pipeline structure", ok, detail);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <frozen-llm.ualn>\n", argv[0]);
    return 2;
  }
  const LlmParams llm = llm_load(argv[1]);
  const LanguageSpec spec = language_init(kSpecSeed);
  const std::string llm_digest = llm.digest();

  oracle_criteria();
  pipeline_criterion(spec);

  const Regime regimes[] = {Regime::kUalignDtw, Regime::kUalignCtc, Regime::kAsrBased, Regime::kDirectlyMt};
  std::map<std::uint64_t, std::map<Regime, RegimeRun>> runs;
  double crit4_seconds = 0.0;
  double init_cosine = 0.0;
  for (std::uint64_t seed : kSeeds) {
    const Fixture fx = make_fixture(llm, spec, seed);
    if (seed == kSeeds[0]) {
      const auto t0 = Clock::now();
      const AdapterParams init = adapter_init(fx.adapter, Rng(seed).split("adapter"));
      EvalOptions align_only;
      align_only.decode = false;
      init_cosine = evaluate(init, llm, fx.eval, align_only).alignment_cosine;
      crit4_seconds += seconds_since(t0);
    }
    for (Regime r : regimes) runs[seed][r] = run_regime(fx, r);
    if (seed == kSeeds[0]) {
      crit4_seconds += runs[seed][Regime::kUalignDtw].stage1_seconds + runs[seed][Regime::kAsrBased].stage1_seconds;

      const RegimeRun& dtw = runs[seed][Regime::kUalignDtw];
      const RegimeRun& asr = runs[seed][Regime::kAsrBased];
      record(4, "alignment geometry",
             std::abs(init_cosine) < kInitCosineBound && dtw.stage1_cosine > kTrainedCosineFloor &&
                 asr.stage1_cosine < dtw.stage1_cosine && crit4_seconds < 15 * 60,
             fmt("init %.4f", init_cosine) + fmt(" (|.| < %.2f), ", kInitCosineBound) +
                 fmt("U-Align(DTW) %.4f", dtw.stage1_cosine) + fmt(" (> %.2f), ", kTrainedCosineFloor) +
                 fmt("ASR-based %.4f (< U-Align)", asr.stage1_cosine) + fmt(", %.0f s (limit 900 s)", crit4_seconds));

      // Criterion 5: per-utterance stage-1 cost and the FLOPs -> CER curves.
      const double utterances = static_cast<double>(kStageEpochs * fx.train.size());
      const double dtw_cost = static_cast<double>(dtw.stage1_ledger.total()) / utterances;
      const double asr_cost = static_cast<double>(asr.stage1_ledger.total()) / utterances;
      const double ratio = asr_cost / dtw_cost;
      const auto a = cer_curve(dtw), b = cer_curve(asr);
      const double lo = std::max(a.front().first, b.front().first);
      const double hi = std::min(a.back().first, b.back().first);
      std::vector<double> xs;
      for (const auto* c : {&a, &b})
        for (std::size_t k = 1; k < c->size(); ++k)
          if ((*c)[k].first >= lo && (*c)[k].first <= hi) xs.push_back((*c)[k].first);
      std::sort(xs.begin(), xs.end());
      bool below = !xs.empty();
      std::string worst;
      for (double x : xs) {
        const double ya = step_value(a, x), yb = step_value(b, x);
        if (!(ya < yb)) {
          below = false;
          worst = fmt(", violated at %.3g FLOPs", x) + fmt(" (U-Align %.4f", ya) + fmt(" vs ASR-based %.4f)", yb);
          break;
        }
      }
      record(5, "efficiency", ratio > kFlopRatioFloor && below,
             fmt("stage-1 FLOPs per utterance ASR-based/U-Align = %.2f", ratio) + fmt(" (> %.0f); ", kFlopRatioFloor) +
                 "U-Align CER below ASR-based at " + std::to_string(xs.size()) + " common checkpoints" + worst);

      // Criterion 7: repeat the U-Align two-stage run.
      const RegimeRun again = run_regime(fx, Regime::kUalignDtw);
      const bool same = again.state_bytes == dtw.state_bytes && again.report_json == dtw.report_json &&
                        again.curve_csv == dtw.curve_csv && llm.digest() == llm_digest;
      record(7, "determinism", same,
             same ? "final train state, report and curves are bit-identical across two U-Align two-stage runs"
                  : "repeated U-Align two-stage run diverged");
    }
  }

  // Criterion 6.
  std::size_t good = 0;
  std::string detail;
  for (std::uint64_t seed : kSeeds) {
    auto& s = runs[seed];
    const MetricsReport& d = s[Regime::kUalignDtw].final_metrics;
    bool ok = true;
    for (Regime r : {Regime::kUalignCtc, Regime::kAsrBased, Regime::kDirectlyMt}) {
      const MetricsReport& o = s[r].final_metrics;
      ok = ok && d.ic_accuracy > o.ic_accuracy && d.ner_all > o.ner_all;
    }
    const double mt_ner = s[Regime::kDirectlyMt].final_metrics.ner_all;
    ok = ok && d.ner_all >= mt_ner && s[Regime::kAsrBased].final_metrics.ner_all >= mt_ner;
    good += ok;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + (ok ? " ok" : " violated");
    detail += " [IC";
    for (Regime r : regimes) detail += fmt(" %.3f", s[r].final_metrics.ic_accuracy);
    detail += ", NER-ALL";
    for (Regime r : regimes) detail += fmt(" %.3f", s[r].final_metrics.ner_all);
    detail += "]";
  }
  record(6, "effectiveness ordering", good >= kSeedsRequired,
         std::to_string(good) + "/" + std::to_string(std::size(kSeeds)) + " seeds (need " +
             std::to_string(kSeedsRequired) + "), order dtw ctc asr mt: " + detail);

  std::sort(verdicts.begin(), verdicts.end(), [](const Verdict& a, const Verdict& b) { return a.id < b.id; });
  std::printf("\nsummary\n");
  bool all = true;
  for (const Verdict& v : verdicts) {
    std::printf("%s criterion %d (%s)\n", v.pass ? "PASS" : "FAIL", v.id, v.name.c_str());
    all = all && v.pass;
  }
  return all ? 0 : 1;
}
