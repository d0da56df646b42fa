#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include "commands.hpp"
#include "json.hpp"
#include "json_config.hpp"
#include "run_dir.hpp"
#include "ualign/corpus/corpus_io.hpp"
#include "ualign/corpus/pipeline.hpp"
#include "ualign/numerics/error.hpp"
#include "ualign/oracle/suites.hpp"
#include "ualign/trainer/pretrain.hpp"

namespace ualign::cli {

namespace {

using nlohmann::ordered_json;

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

ordered_json counts_json(const TaskCounts& c) {
  ordered_json j;
  for (Task t : kAllTasks) j[std::string(task_name(t))] = c.of(t);
  return j;
}

// Weights per task in kAllTasks order from a task list and its ratio.
TaskCounts task_weights(const std::string& tasks_text, const std::string& ratio_text) {
  const std::vector<Task> tasks = parse_task_list(tasks_text);
  const std::vector<std::size_t> ratio = parse_ratio(ratio_text);
  if (ratio.size() != tasks.size())
    throw InvalidArgument("--ratio has " + std::to_string(ratio.size()) + " weights for " +
                          std::to_string(tasks.size()) + " tasks");
  TaskCounts w;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    switch (tasks[k]) {
      case Task::kAsr: w.asr = ratio[k]; break;
      case Task::kIc: w.ic = ratio[k]; break;
      case Task::kNer: w.ner = ratio[k]; break;
      case Task::kSr: w.sr = ratio[k]; break;
    }
  }
  return w;
}

struct LanguageFlags {
  std::uint64_t spec_seed = 1;
  std::size_t in_dim = 16;
  double noise_sigma = 0.1;
  int frames_min = 2;
  int frames_max = 5;

  void add(CLI::App* cmd) {
    cmd->add_option("--spec-seed", spec_seed, "Seed of the synthetic language");
    cmd->add_option("--in-dim", in_dim, "Acoustic feature dimension")->check(CLI::PositiveNumber);
    cmd->add_option("--noise-sigma", noise_sigma, "Frame noise standard deviation")->check(CLI::NonNegativeNumber);
    cmd->add_option("--frames-min", frames_min, "Fewest frames per token")->check(CLI::PositiveNumber);
    cmd->add_option("--frames-max", frames_max, "Most frames per token")->check(CLI::PositiveNumber);
  }

  LanguageSpec build() const {
    LanguageOptions o;
    o.in_dim = in_dim;
    o.noise_sigma = noise_sigma;
    o.frames_min = frames_min;
    o.frames_max = frames_max;
    return language_init(spec_seed, o);
  }
};

}  // namespace

std::vector<Task> parse_task_list(const std::string& text) {
  std::vector<Task> out;
  for (const std::string& name : split(text, ',')) {
    const Task t = parse_task(name);
    for (Task seen : out)
      if (seen == t) throw InvalidArgument("task '" + name + "' listed twice");
    out.push_back(t);
  }
  if (out.empty()) throw InvalidArgument("task list is empty");
  return out;
}

std::vector<std::size_t> parse_ratio(const std::string& text) {
  std::vector<std::size_t> out;
  for (const std::string& part : split(text, ':')) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (part.empty() || used != part.size() || part[0] == '-' || v == 0)
      throw InvalidArgument("ratio weight '" + part + "' is not a positive integer");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

void warn(const std::string& message) { std::cerr << "warning: " << message << "\n"; }

Handler register_synth(CLI::App& app) {
  struct Flags {
    LanguageFlags language;
    std::size_t samples = 2000;
    std::string tasks = "asr,ic,ner,sr";
    std::string ratio = "927:175:648:250";
    std::uint64_t seed = 0;
    std::string prefix = "s";
    std::string out;
  };
  auto f = std::make_shared<Flags>();
  CLI::App* cmd = app.add_subcommand("synth", "Synthesize a corpus from the seeded language");
  f->language.add(cmd);
  cmd->add_option("--samples", f->samples, "Number of samples")->check(CLI::PositiveNumber);
  cmd->add_option("--tasks", f->tasks, "Comma-separated tasks");
  cmd->add_option("--ratio", f->ratio, "Colon-separated weights, one per --tasks entry");
  cmd->add_option("--seed", f->seed, "Sample seed");
  cmd->add_option("--id-prefix", f->prefix, "Sample id prefix");
  cmd->add_option("--out", f->out, "Output directory")->required();

  return [f, cmd]() {
    const TaskCounts counts = split_counts(f->samples, task_weights(f->tasks, f->ratio));
    const LanguageSpec spec = f->language.build();
    RunDir run(f->out, echo_config(*cmd));

    const CorpusGenerator gen(spec, counts, f->seed, f->prefix);
    CorpusWriter writer(run / "corpus.jsonl");
    std::vector<Sample> all;
    all.reserve(gen.size());
    for (std::size_t k = 0; k < gen.size(); ++k) {
      all.push_back(gen.at(k));
      writer.write(all.back());
    }
    writer.close();
    write_text(run / "language.json", spec.to_json() + "\n");

    ordered_json m;
    m["command"] = "synth";
    m["samples"] = all.size();
    m["counts"] = counts_json(counts);
    m["spec_seed"] = f->language.spec_seed;
    m["seed"] = f->seed;
    m["language_digest"] = spec.digest();
    m["samples_digest"] = samples_digest(all);
    m["corpus_sha256"] = file_digest(run / "corpus.jsonl");
    write_text(run / "manifest.json", m.dump(2) + "\n");
    run.commit();
    std::cout << "wrote " << all.size() << " samples to " << (run / "corpus.jsonl").string() << "\n";
    return kExitOk;
  };
}

Handler register_pipeline(CLI::App& app) {
  struct Flags {
    LanguageFlags language;
    std::size_t inputs = 7;
    std::size_t fan_out = 10;
    double failure_rate = 0.0;
    std::string tasks = "asr,ic,ner,sr";
    std::string ratio = "927:175:648:250";
    std::uint64_t seed = 0;
    std::string out;
  };
  auto f = std::make_shared<Flags>();
  CLI::App* cmd = app.add_subcommand("pipeline", "Run the mock augment/filter/translate/TTS pipeline");
  f->language.add(cmd);
  cmd->add_option("--inputs", f->inputs, "Text-only source records")->check(CLI::PositiveNumber);
  cmd->add_option("--fan-out", f->fan_out, "Augmented variants per source record")->check(CLI::PositiveNumber);
  cmd->add_option("--failure-rate", f->failure_rate, "Per-record provider failure probability")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--tasks", f->tasks, "Comma-separated tasks");
  cmd->add_option("--ratio", f->ratio, "Colon-separated weights, one per --tasks entry");
  cmd->add_option("--seed", f->seed, "Pipeline seed");
  cmd->add_option("--out", f->out, "Output directory")->required();

  return [f, cmd]() {
    const TaskCounts counts = split_counts(f->inputs, task_weights(f->tasks, f->ratio));
    const LanguageSpec spec = f->language.build();
    RunDir run(f->out, echo_config(*cmd));

    MockPipelineOptions opts;
    opts.fan_out = f->fan_out;
    opts.failure_rate = f->failure_rate;
    const auto stages = mock_pipeline(spec, opts);
    const std::vector<Record> input = source_records(spec, counts, f->seed);
    std::vector<Record> output;
    const PipelineManifest manifest = pipeline_run(stages, input, output, f->seed);

    CorpusWriter writer(run / "corpus.jsonl");
    std::string provenance;
    for (const Record& r : output) {
      writer.write(record_to_sample(r));
      ordered_json line;
      line["id"] = r.id;
      line["chain"] = ordered_json::array();
      for (const Provenance& p : r.provenance)
        line["chain"].push_back({{"source_id", p.source_id}, {"stage", p.stage}, {"seed", p.seed}});
      provenance += line.dump() + "\n";
    }
    writer.close();
    write_text(run / "provenance.jsonl", provenance);
    write_text(run / "language.json", spec.to_json() + "\n");
    write_text(run / "manifest.json", manifest.to_json() + "\n");
    run.commit();
    std::cout << manifest.input << " inputs -> " << manifest.output << " records\n";
    return kExitOk;
  };
}

Handler register_pretrain(CLI::App& app) {
  struct Flags {
    LanguageFlags language;
    std::string language_file;
    LlmConfig llm;
    PretrainConfig train;
    std::size_t log_every = 500;
    std::string out;
  };
  auto f = std::make_shared<Flags>();
  CLI::App* cmd = app.add_subcommand("pretrain", "Text-pretrain the stand-in LLM before it is frozen");
  f->language.add(cmd);
  cmd->add_option("--language", f->language_file, "language.json from synth (overrides --spec-seed)");
  cmd->add_option("--d-model", f->llm.d_model, "Model width")->check(CLI::PositiveNumber);
  cmd->add_option("--layers", f->llm.layers, "Decoder blocks")->check(CLI::PositiveNumber);
  cmd->add_option("--heads", f->llm.heads, "Attention heads")->check(CLI::PositiveNumber);
  cmd->add_option("--ffn-mult", f->llm.ffn_mult, "Feed-forward width multiple")->check(CLI::PositiveNumber);
  cmd->add_option("--max-len", f->llm.max_len, "Longest sequence")->check(CLI::PositiveNumber);
  cmd->add_option("--llm-seed", f->llm.seed, "Initialization seed");
  cmd->add_option("--steps", f->train.steps, "Optimizer steps");
  cmd->add_option("--batch-size", f->train.batch_size, "Examples per step")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", f->train.lr, "Peak learning rate");
  cmd->add_option("--warmup", f->train.warmup, "Warmup fraction of steps");
  cmd->add_option("--final-lr-fraction", f->train.final_lr_fraction, "Final lr as a fraction of peak");
  cmd->add_option("--clip-norm", f->train.clip_norm, "Global gradient norm clip");
  cmd->add_option("--repeat-min", f->train.repeat_min, "Fewest copies of each pseudo-speech row");
  cmd->add_option("--repeat-max", f->train.repeat_max, "Most copies of each pseudo-speech row");
  cmd->add_option("--scale-min", f->train.scale_min, "Smallest pseudo-speech scale");
  cmd->add_option("--scale-max", f->train.scale_max, "Largest pseudo-speech scale");
  cmd->add_option("--noise", f->train.noise, "Relative pseudo-speech noise");
  cmd->add_option("--seed", f->train.seed, "Pretraining seed");
  cmd->add_option("--log-every", f->log_every, "Progress interval in steps (0 = silent)");
  cmd->add_option("--out", f->out, "Output directory")->required();

  return [f, cmd]() {
    LanguageSpec spec;
    if (!f->language_file.empty()) {
      std::ifstream in(f->language_file);
      if (!in) throw IoError("cannot open " + f->language_file);
      std::stringstream buf;
      buf << in.rdbuf();
      spec = LanguageSpec::from_json(buf.str());
    } else {
      spec = f->language.build();
    }
    RunDir run(f->out, echo_config(*cmd));
    double last_loss = 0.0;
    const std::size_t every = f->log_every;
    LlmParams llm = pretrain_llm(llm_init(f->llm), spec, f->train, [&](std::size_t step, double loss) {
      last_loss = loss;
      if (every > 0 && step % every == 0) std::cerr << "pretrain step " << step << " loss " << loss << "\n";
    });
    llm_save(llm, run / "llm.ualn");
    ordered_json m;
    m["command"] = "pretrain";
    m["language_digest"] = spec.digest();
    m["llm_digest"] = llm.digest();
    m["steps"] = f->train.steps;
    m["final_loss"] = last_loss;
    m["checkpoint_sha256"] = file_digest(run / "llm.ualn");
    write_text(run / "manifest.json", m.dump(2) + "\n");
    run.commit();
    std::cout << "wrote " << (run / "llm.ualn").string() << " (digest " << llm.digest() << ")\n";
    return kExitOk;
  };
}

Handler register_oracle(CLI::App& app) {
  auto suite = std::make_shared<std::string>("all");
  CLI::App* cmd = app.add_subcommand("oracle", "Run the brute-force and finite-difference oracle suites");
  cmd->add_option("--suite", *suite, "dtw, ctc, grad or all")
      ->check(CLI::IsMember({"dtw", "ctc", "grad", "all"}));
  return [suite]() {
    std::vector<oracle::SuiteReport> reports;
    const bool all = *suite == "all";
    if (all || *suite == "dtw") reports.push_back(oracle::dtw_suite());
    if (all || *suite == "ctc") reports.push_back(oracle::ctc_suite());
    if (all || *suite == "grad")
      for (auto& r : oracle::grad_suites()) reports.push_back(std::move(r));
    bool ok = true;
    for (const auto& r : reports) {
      std::cout << (r.passed() ? "PASS " : "FAIL ") << r.summary() << "\n";
      ok = ok && r.passed();
    }
    return ok ? kExitOk : kExitOracle;
  };
}

}  // namespace ualign::cli
