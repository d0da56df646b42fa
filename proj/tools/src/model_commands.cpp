#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <regex>

#include "commands.hpp"
#include "json.hpp"
#include "json_config.hpp"
#include "run_dir.hpp"
#include "ualign/adapter/checkpoint.hpp"
#include "ualign/corpus/corpus_io.hpp"
#include "ualign/losses/dtw.hpp"
#include "ualign/numerics/error.hpp"
#include "ualign/numerics/kernels.hpp"
#include "ualign/trainer/trainer.hpp"

namespace ualign::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::vector<Sample> load_corpus(const std::string& path, const char* what) {
  std::vector<Sample> samples = corpus_read(path);
  if (samples.empty()) throw InvalidArgument(std::string(what) + " " + path + " holds no samples");
  return samples;
}

void check_adapter_fits(const AdapterConfig& a, const LlmParams& llm, const std::vector<Sample>& corpus) {
  if (a.out_dim != llm.config().d_model)
    throw ShapeError("adapter out_dim " + std::to_string(a.out_dim) + " != LLM d_model " +
                     std::to_string(llm.config().d_model));
  const std::size_t in_dim = corpus.front().speech.cols();
  if (a.in_dim != in_dim)
    throw ShapeError("adapter in_dim " + std::to_string(a.in_dim) + " != corpus feature dim " +
                     std::to_string(in_dim));
}

ordered_json parsed_json(const std::string& text) { return ordered_json::parse(text); }

// Latest checkpoints/epoch-NNN.ualn, or empty.
fs::path latest_epoch_checkpoint(const fs::path& dir) {
  static const std::regex pattern(R"(epoch-(\d{3,})\.ualn)");
  fs::path best;
  long best_epoch = -1;
  if (!fs::is_directory(dir)) return best;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (!std::regex_match(name, m, pattern)) continue;
    const long e = std::stol(m[1]);
    if (e > best_epoch) {
      best_epoch = e;
      best = entry.path();
    }
  }
  return best;
}

std::string epoch_name(std::uint64_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch-%03llu.ualn", static_cast<unsigned long long>(epoch));
  return buf;
}

void log_point(const CurvePoint& p) {
  const MetricsReport& m = p.metrics;
  std::fprintf(stderr, "step %llu epoch %llu flops %.3e loss %.4f | CER %.3f IC %.3f NER %.3f SR %.3f cos %.3f\n",
               static_cast<unsigned long long>(p.step), static_cast<unsigned long long>(p.epoch),
               static_cast<double>(p.flops), p.train_loss, m.asr_cer, m.ic_accuracy, m.ner_all, m.sr_exact,
               m.alignment_cosine);
}

struct AdapterFlags {
  AdapterConfig config;

  void add(CLI::App* cmd) {
    cmd->add_option("--hidden-dim", config.hidden_dim, "Adapter convolution channels")->check(CLI::PositiveNumber);
    cmd->add_option("--mlp-hidden", config.mlp_hidden, "Adapter MLP width")->check(CLI::PositiveNumber);
    cmd->add_option("--conv-layers", config.conv_layers, "Strided convolution layers")->check(CLI::PositiveNumber);
    cmd->add_option("--conv-kernel", config.conv_kernel, "Convolution kernel width")->check(CLI::PositiveNumber);
    cmd->add_option("--conv-stride", config.conv_stride, "Convolution stride")->check(CLI::PositiveNumber);
    cmd->add_option("--activation", config.activation, "gelu or relu");
  }
};

}  // namespace

Handler register_train(CLI::App& app) {
  struct Flags {
    std::string regime;
    std::string corpus, eval_corpus, llm, init_checkpoint, out;
    std::size_t epochs = 3;
    std::size_t batch_size = 8;
    double lr = 1e-3;
    double clip_norm = 1.0;
    std::uint64_t seed = 0;
    std::size_t eval_every = 0;
    std::string tasks = "asr,ic,ner,sr";
    bool resume = false;
    AdapterFlags adapter;
  };
  auto f = std::make_shared<Flags>();
  CLI::App* cmd = app.add_subcommand("train", "Train the adapter under one regime");
  cmd->add_option("--regime", f->regime, "ualign_dtw, ualign_ctc, asr_based, stage2 or directly_mt")->required();
  cmd->add_option("--corpus", f->corpus, "Training corpus (JSONL)")->required();
  cmd->add_option("--eval-corpus", f->eval_corpus, "Evaluation corpus (defaults to the training corpus)");
  cmd->add_option("--llm", f->llm, "Frozen LLM checkpoint")->required();
  cmd->add_option("--init-checkpoint", f->init_checkpoint, "Adapter or train-state checkpoint to start from");
  cmd->add_option("--out", f->out, "Output directory")->required();
  cmd->add_option("--epochs", f->epochs, "Epochs")->check(CLI::PositiveNumber);
  cmd->add_option("--batch-size", f->batch_size, "Samples per step")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", f->lr, "Adam learning rate");
  cmd->add_option("--clip-norm", f->clip_norm, "Global gradient norm clip (<= 0 disables)");
  cmd->add_option("--seed", f->seed, "Adapter init and shuffling seed");
  cmd->add_option("--eval-every", f->eval_every, "Steps between curve points (0 = epoch ends)");
  cmd->add_option("--tasks", f->tasks, "Multitask mix for stage2 and directly_mt");
  cmd->add_flag("--resume", f->resume, "Continue from the latest epoch checkpoint in --out");
  f->adapter.add(cmd);

  return [f, cmd]() {
    TrainConfig config;
    config.regime = parse_regime(f->regime);
    config.epochs = f->epochs;
    config.batch_size = f->batch_size;
    config.adam.lr = f->lr;
    config.adam.clip_norm = f->clip_norm;
    config.seed = f->seed;
    config.eval_every = f->eval_every;
    config.tasks = parse_task_list(f->tasks);
    config.validate();
    if (config.regime == Regime::kStage2 && f->init_checkpoint.empty() && !f->resume)
      throw InvalidArgument("--regime stage2 needs --init-checkpoint");

    const LlmParams llm = llm_load(f->llm);
    const std::vector<Sample> corpus = load_corpus(f->corpus, "corpus");
    std::vector<Sample> eval_set;
    if (f->eval_corpus.empty()) {
      warn("no --eval-corpus; evaluating on the training corpus");
      eval_set = corpus;
    } else {
      eval_set = load_corpus(f->eval_corpus, "eval corpus");
    }

    RunDir run(f->out, echo_config(*cmd));
    const fs::path ckpt_dir = run / "checkpoints";
    fs::create_directories(ckpt_dir);

    TrainState state;
    std::string started_from = "fresh";
    const fs::path resume_from = f->resume ? latest_epoch_checkpoint(ckpt_dir) : fs::path{};
    if (!resume_from.empty()) {
      state = load_train_state(resume_from);
      started_from = resume_from.string();
      std::cerr << "resuming from " << resume_from.string() << "\n";
    } else {
      if (f->resume) warn("--resume found no epoch checkpoint in " + ckpt_dir.string() + "; starting over");
      if (config.regime == Regime::kDirectlyMt && !f->init_checkpoint.empty()) {
        warn("directly_mt trains from a fresh adapter; ignoring --init-checkpoint");
      }
      if (config.regime != Regime::kDirectlyMt && !f->init_checkpoint.empty()) {
        // A train state carries its FLOP ledger and curve forward, so the
        // two stages read as one run on the compute axis.
        const Checkpoint ck = read_checkpoint(f->init_checkpoint);
        if (ck.section == kTrainStateSection) {
          const TrainState prior = load_train_state(f->init_checkpoint);
          state = TrainState::fresh(prior.adapter);
          state.ledger = prior.ledger;
          state.curve = prior.curve;
        } else {
          state = TrainState::fresh(adapter_from_checkpoint(ck));
        }
        started_from = f->init_checkpoint;
      } else {
        AdapterConfig ac = f->adapter.config;
        ac.in_dim = corpus.front().speech.cols();
        ac.out_dim = llm.config().d_model;
        state = TrainState::fresh(adapter_init(ac, Rng(config.seed).split("adapter")));
      }
    }
    check_adapter_fits(state.adapter.config(), llm, corpus);
    check_adapter_fits(state.adapter.config(), llm, eval_set);

    const std::string llm_digest = llm.digest();
    const FlopLedger ledger_at_start = state.ledger;
    const EvalOptions eval_options;
    train_epochs(
        state, llm, corpus, config,
        [&](TrainState& s) {
          record_curve_point(s, s.adapter, llm, eval_set, eval_options);
          log_point(s.curve.back());
        },
        [&](TrainState& s) { save_train_state(s, ckpt_dir / epoch_name(s.epoch)); });
    if (llm.digest() != llm_digest) throw Error("frozen LLM weights changed during training");

    save_train_state(state, ckpt_dir / "final.ualn");
    write_text(run / "curves.csv", curve_to_csv(state.curve));
    const MetricsReport report =
        state.curve.empty() ? evaluate(state.adapter, llm, eval_set, eval_options) : state.curve.back().metrics;
    write_text(run / "report.json", report.to_json() + "\n");

    ordered_json m;
    m["command"] = "train";
    m["regime"] = std::string(regime_name(config.regime));
    m["started_from"] = started_from;
    m["epochs"] = state.epoch;
    m["steps"] = state.step;
    m["skipped_samples"] = state.skipped;
    m["llm_digest"] = llm_digest;
    m["corpus_digest"] = samples_digest(corpus);
    m["eval_digest"] = samples_digest(eval_set);
    m["flops_at_start"] = ledger_at_start.total();
    m["ledger"] = parsed_json(state.ledger.to_json());
    m["final_checkpoint_sha256"] = file_digest(ckpt_dir / "final.ualn");
    write_text(run / "manifest.json", m.dump(2) + "\n");
    run.commit();
    std::cout << report.to_json() << "\n";
    return kExitOk;
  };
}

Handler register_eval(CLI::App& app) {
  struct Flags {
    std::string checkpoint, corpus, llm, out;
    std::size_t max_decode = 32;
  };
  auto f = std::make_shared<Flags>();
  CLI::App* cmd = app.add_subcommand("eval", "Evaluate an adapter checkpoint");
  cmd->add_option("--checkpoint", f->checkpoint, "Adapter or train-state checkpoint")->required();
  cmd->add_option("--corpus", f->corpus, "Evaluation corpus (JSONL)")->required();
  cmd->add_option("--llm", f->llm, "Frozen LLM checkpoint")->required();
  cmd->add_option("--max-decode", f->max_decode, "Greedy decoding length cap")->check(CLI::PositiveNumber);
  cmd->add_option("--out", f->out, "Also write report.json here");

  return [f, cmd]() {
    const AdapterParams adapter = load_adapter(f->checkpoint);
    const LlmParams llm = llm_load(f->llm);
    const std::vector<Sample> samples = load_corpus(f->corpus, "corpus");
    check_adapter_fits(adapter.config(), llm, samples);
    std::unique_ptr<RunDir> run;
    if (!f->out.empty()) run = std::make_unique<RunDir>(f->out, echo_config(*cmd));
    EvalOptions options;
    options.max_decode = f->max_decode;
    const std::string json = evaluate(adapter, llm, samples, options).to_json();
    if (run) {
      write_text(*run / "report.json", json + "\n");
      run->commit();
    }
    std::cout << json << "\n";
    return kExitOk;
  };
}

Handler register_project(CLI::App& app) {
  struct Flags {
    std::vector<std::string> checkpoints, labels;
    std::string corpus, llm, out;
    std::size_t max_samples = 50;
  };
  auto f = std::make_shared<Flags>();
  CLI::App* cmd = app.add_subcommand("project", "Export a shared 2-D PCA of text and adapted speech embeddings");
  cmd->add_option("--checkpoints", f->checkpoints, "Adapter checkpoints, comma-separated")
      ->required()
      ->delimiter(',');
  cmd->add_option("--labels", f->labels, "One label per checkpoint, comma-separated")->delimiter(',');
  cmd->add_option("--corpus", f->corpus, "Corpus (JSONL)")->required();
  cmd->add_option("--llm", f->llm, "Frozen LLM checkpoint")->required();
  cmd->add_option("--max-samples", f->max_samples, "Samples taken from the front of the corpus")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--out", f->out, "Output directory")->required();

  return [f, cmd]() {
    std::vector<std::string> labels = f->labels;
    if (labels.empty()) {
      for (const std::string& c : f->checkpoints) labels.push_back(fs::path(c).stem().string());
    }
    if (labels.size() != f->checkpoints.size())
      throw InvalidArgument("--labels needs one entry per checkpoint");
    std::map<std::string, int> seen{{"text", 1}};
    for (const std::string& l : labels)
      if (seen[l]++ > 0) throw InvalidArgument("label '" + l + "' is not unique (\"text\" is reserved)");

    const LlmParams llm = llm_load(f->llm);
    std::vector<Sample> samples = load_corpus(f->corpus, "corpus");
    if (samples.size() > f->max_samples) samples.resize(f->max_samples);
    std::vector<AdapterParams> adapters;
    for (const std::string& c : f->checkpoints) {
      adapters.push_back(load_adapter(c));
      check_adapter_fits(adapters.back().config(), llm, samples);
    }
    RunDir run(f->out, echo_config(*cmd));

    struct Point {
      std::size_t label, sample, position, matched;   // matched: row of the aligned text point
      int token;
    };
    std::vector<Point> points;
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> text_base(samples.size());
    for (std::size_t s = 0; s < samples.size(); ++s) {
      const Matrix e = embed_tokens(llm, samples[s].tokens);
      text_base[s] = rows.size();
      for (std::size_t j = 0; j < e.rows(); ++j) {
        points.push_back({0, s, j, rows.size(), samples[s].tokens[j]});
        rows.emplace_back(e.row(j).begin(), e.row(j).end());
      }
    }
    std::vector<double> cosine_sum(adapters.size(), 0.0);
    std::vector<std::size_t> count(adapters.size(), 0);
    for (std::size_t a = 0; a < adapters.size(); ++a) {
      for (std::size_t s = 0; s < samples.size(); ++s) {
        const Matrix h = adapter_forward(adapters[a], samples[s].speech).embeddings;
        if (h.rows() == 0) continue;
        const Matrix e = embed_tokens(llm, samples[s].tokens);
        const DtwResult r = dtw_forward(cosine_distance_matrix(h, e));
        std::vector<std::size_t> partner(h.rows(), 0);
        for (auto it = r.path.steps.rbegin(); it != r.path.steps.rend(); ++it) partner[it->first] = it->second;
        for (std::size_t i = 0; i < h.rows(); ++i) {
          const std::size_t j = partner[i];
          points.push_back({a + 1, s, i, text_base[s] + j, samples[s].tokens[j]});
          rows.emplace_back(h.row(i).begin(), h.row(i).end());
          cosine_sum[a] += 1.0 - cosine_distance(h.row(i), e.row(j));
          ++count[a];
        }
      }
    }
    Matrix pooled(rows.size(), llm.config().d_model);
    for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), pooled.row(r).begin());
    const Matrix xy = pca_project(pooled, 2);

    std::vector<std::string> names{"text"};
    names.insert(names.end(), labels.begin(), labels.end());
    std::vector<double> dist_sum(names.size(), 0.0);
    std::string csv = "label,sample_id,position,token,x,y\n";
    char buf[64];
    for (std::size_t k = 0; k < points.size(); ++k) {
      const Point& p = points[k];
      csv += names[p.label] + "," + samples[p.sample].id + "," + std::to_string(p.position) + "," +
             std::to_string(p.token);
      for (std::size_t c = 0; c < 2; ++c) {
        std::snprintf(buf, sizeof buf, ",%.17g", xy(k, c));
        csv += buf;
      }
      csv += "\n";
      if (p.label > 0)
        dist_sum[p.label] += std::hypot(xy(k, 0) - xy(p.matched, 0), xy(k, 1) - xy(p.matched, 1));
    }
    write_text(run / "projection.csv", csv);

    ordered_json m;
    m["command"] = "project";
    m["samples"] = samples.size();
    m["points"] = points.size();
    m["labels"] = ordered_json::array();
    for (std::size_t a = 0; a < adapters.size(); ++a) {
      const double n = static_cast<double>(std::max<std::size_t>(count[a], 1));
      m["labels"].push_back({{"label", labels[a]},
                             {"checkpoint", f->checkpoints[a]},
                             {"points", count[a]},
                             {"mean_cosine_to_text", cosine_sum[a] / n},
                             {"mean_2d_distance_to_text", dist_sum[a + 1] / n}});
    }
    write_text(run / "manifest.json", m.dump(2) + "\n");
    run.commit();
    std::cout << "wrote " << points.size() << " points to " << (run / "projection.csv").string() << "\n";
    return kExitOk;
  };
}

}  // namespace ualign::cli
