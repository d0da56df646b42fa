#include "ualign/trainer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "ualign/adapter/checkpoint.hpp"
#include "ualign/corpus/vocab.hpp"
#include "ualign/losses/cross_entropy.hpp"
#include "ualign/losses/ctc.hpp"
#include "ualign/losses/dtw.hpp"
#include "ualign/numerics/error.hpp"
#include "ualign/numerics/kernels.hpp"
#include "ualign/trainer/sequence.hpp"

namespace ualign {

std::string_view regime_name(Regime regime) {
  switch (regime) {
    case Regime::kUalignDtw: return "ualign_dtw";
    case Regime::kUalignCtc: return "ualign_ctc";
    case Regime::kAsrBased: return "asr_based";
    case Regime::kDirectlyMt: return "directly_mt";
    case Regime::kStage2: return "stage2";
  }
  return "?";
}

Regime parse_regime(std::string_view name) {
  for (Regime r : {Regime::kUalignDtw, Regime::kUalignCtc, Regime::kAsrBased, Regime::kDirectlyMt,
                   Regime::kStage2}) {
    if (regime_name(r) == name) return r;
  }
  throw InvalidArgument("unknown regime '" + std::string(name) +
                        "' (expected ualign_dtw, ualign_ctc, asr_based, directly_mt or stage2)");
}

bool is_alignment_regime(Regime regime) {
  return regime == Regime::kUalignDtw || regime == Regime::kUalignCtc || regime == Regime::kAsrBased;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (tasks.empty()) throw InvalidArgument("the task mix is empty");
  adam.validate();
}

Matrix language_table(const LlmParams& llm) {
  const Matrix full = llm.embedding_table();
  return slice_rows(full, 0, vocab::kLanguageTokens);
}

std::pair<double, double> alignment_score(const Matrix& h, const Matrix& e) {
  const Matrix cost = cosine_distance_matrix(h, e);
  const DtwResult r = dtw_forward(cost);
  double cos_sum = 0.0;
  for (const auto& [i, j] : r.path.steps) cos_sum += 1.0 - cost(i, j);
  return {cos_sum / static_cast<double>(r.path.length()), r.loss};
}

MetricsReport evaluate(const AdapterParams& adapter, const LlmParams& llm,
                       std::span<const Sample> samples, const EvalOptions& options) {
  if (samples.empty()) throw InvalidArgument("evaluate: the eval set is empty");
  MetricsAccumulator acc;
  for (const Sample& s : samples) {
    if (adapter.config().output_length(s.frames()) == 0) continue;
    const Matrix h = adapter_forward(adapter, s.speech).embeddings;
    if (options.alignment) {
      const auto [cosine, loss] = alignment_score(h, embed_tokens(llm, s.tokens));
      acc.add_alignment(cosine, loss);
    }
    if (options.decode) {
      const auto prompt = prompt_tokens(s.task);
      const auto predicted = greedy_decode(llm, prompt, h, options.max_decode);
      acc.add(s.task, s.target, predicted);
    }
  }
  MetricsReport r = acc.finish();
  r.validate();
  return r;
}

TrainState TrainState::fresh(AdapterParams adapter) {
  TrainState s;
  s.adam = adam_init(adapter.tensors());
  s.adapter = std::move(adapter);
  return s;
}

bool sample_loss(TrainState& state, const LlmParams& llm, const Sample& sample, Regime regime,
                 const TrainConfig& config, double& loss) {
  AdapterParams& adapter = state.adapter;
  const AdapterConfig& ac = adapter.config();
  const std::size_t frames = sample.frames();
  const std::size_t out_len = ac.output_length(frames);
  if (out_len == 0) return false;

  switch (regime) {
    case Regime::kUalignDtw: {
      AdapterOutput out = adapter_forward(adapter, sample.speech);
      const Matrix e = embed_tokens(llm, sample.tokens);
      const DtwResult r = dtw_forward(cosine_distance_matrix(out.embeddings, e));
      loss = r.loss;
      adapter_backward(adapter, out.tape, dtw_backward(r, out.embeddings, e));
      state.ledger.adapter_fwd += adapter_flops(ac, frames, Direction::kForward);
      state.ledger.adapter_bwd += adapter_flops(ac, frames, Direction::kBackward);
      state.ledger.loss_fwd += dtw_flops(out_len, e.rows(), ac.out_dim, r.path.length(), Direction::kForward);
      state.ledger.loss_bwd += dtw_flops(out_len, e.rows(), ac.out_dim, r.path.length(), Direction::kBackward);
      return true;
    }
    case Regime::kUalignCtc: {
      if (out_len < ctc_min_frames(sample.tokens)) return false;
      AdapterOutput out = adapter_forward(adapter, sample.speech);
      const Matrix table = language_table(llm);
      const Matrix logits = ctc_logits(adapter, out.embeddings, table);
      const CtcSetup setup = CtcSetup::from_logits(logits, static_cast<int>(table.rows()));
      loss = ctc_forward(setup, sample.tokens).loss;
      const Matrix gl = ctc_backward(setup, sample.tokens);
      const Matrix gh = ctc_logits_backward(adapter, out.embeddings, table, gl);
      adapter_backward(adapter, out.tape, gh);
      state.ledger.adapter_fwd += adapter_flops(ac, frames, Direction::kForward);
      state.ledger.adapter_bwd += adapter_flops(ac, frames, Direction::kBackward);
      state.ledger.loss_fwd += ctc_flops(out_len, table.rows() + 1, ac.out_dim, sample.tokens.size(), Direction::kForward);
      state.ledger.loss_bwd += ctc_flops(out_len, table.rows() + 1, ac.out_dim, sample.tokens.size(), Direction::kBackward);
      return true;
    }
    case Regime::kAsrBased:
    case Regime::kDirectlyMt:
    case Regime::kStage2: {
      const bool asr = regime == Regime::kAsrBased;
      const Task task = asr ? Task::kAsr : sample.task;
      if (!asr && std::find(config.tasks.begin(), config.tasks.end(), task) == config.tasks.end()) {
        return false;
      }
      const std::vector<int>& target = asr ? sample.tokens : sample.target;
      const auto prompt = prompt_tokens(task);
      const std::size_t len = sequence_length(prompt.size(), out_len, target.size());
      if (len > llm.config().max_len) return false;
      AdapterOutput out = adapter_forward(adapter, sample.speech);
      const LlmSequence seq = build_sequence(llm, prompt, out.embeddings, target);
      LlmOutput lo = llm_forward(llm, seq.inputs);
      const CrossEntropyResult ce = cross_entropy(lo.logits, seq.labels, LlmSequence::kIgnore);
      loss = ce.loss;
      const Matrix gx = llm_backward_to_inputs(llm, lo.tape, ce.grad);
      adapter_backward(adapter, out.tape, speech_rows(seq, gx));
      state.ledger.adapter_fwd += adapter_flops(ac, frames, Direction::kForward);
      state.ledger.adapter_bwd += adapter_flops(ac, frames, Direction::kBackward);
      state.ledger.llm_fwd += llm_flops(llm.config(), len, Direction::kForward);
      state.ledger.llm_bwd += llm_flops(llm.config(), len, Direction::kBackward);
      state.ledger.loss_fwd += cross_entropy_flops(ce.counted, llm.config().vocab_size, Direction::kForward);
      state.ledger.loss_bwd += cross_entropy_flops(ce.counted, llm.config().vocab_size, Direction::kBackward);
      return true;
    }
  }
  return false;
}

StepStats train_step(TrainState& state, const LlmParams& llm, std::span<const Sample* const> batch,
                     Regime regime, const TrainConfig& config) {
  StepStats stats;
  state.adapter.zero_grad();
  double total = 0.0;
  for (const Sample* s : batch) {
    double loss = 0.0;
    if (!sample_loss(state, llm, *s, regime, config, loss)) {
      ++stats.skipped;
      continue;
    }
    if (!std::isfinite(loss)) {
      throw NumericError("non-finite training loss on sample '" + s->id + "' at step " +
                         std::to_string(state.step));
    }
    total += loss;
    ++stats.counted;
  }
  state.skipped += stats.skipped;
  if (stats.counted == 0) return stats;
  const double inv = 1.0 / static_cast<double>(stats.counted);
  for (Tensor& t : state.adapter.tensors())
    for (double& g : t.grad) g *= inv;
  adam_step(state.adapter.tensors(), state.adam, config.adam);
  ++state.step;
  stats.loss = total * inv;
  state.loss_sum += total;
  state.loss_count += stats.counted;
  return stats;
}

void train_epochs(TrainState& state, const LlmParams& llm, std::span<const Sample> corpus,
                  const TrainConfig& config, const EvalHook& on_eval, const EvalHook& on_epoch) {
  config.validate();
  const Regime regime = config.regime;
  if (corpus.empty()) throw InvalidArgument("training corpus is empty");
  const Rng order_root = Rng(config.seed).split("order");
  while (state.epoch < config.epochs) {
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = order_root.split(state.epoch);
    rng.shuffle(order);
    std::vector<const Sample*> batch;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      batch.clear();
      for (std::size_t k = begin; k < std::min(order.size(), begin + config.batch_size); ++k)
        batch.push_back(&corpus[order[k]]);
      const std::uint64_t before = state.step;
      train_step(state, llm, batch, regime, config);
      if (on_eval && config.eval_every > 0 && state.step != before && state.step % config.eval_every == 0) {
        on_eval(state);
      }
    }
    ++state.epoch;
    if (on_eval && (config.eval_every == 0 || state.step % config.eval_every != 0)) on_eval(state);
    if (on_epoch) on_epoch(state);
  }
}

void record_curve_point(TrainState& state, const AdapterParams& adapter, const LlmParams& llm,
                        std::span<const Sample> eval, const EvalOptions& options) {
  CurvePoint p;
  p.step = state.step;
  p.epoch = state.epoch;
  p.flops = state.ledger.total();
  p.train_loss = state.loss_count == 0 ? std::numeric_limits<double>::quiet_NaN()
                                       : state.loss_sum / static_cast<double>(state.loss_count);
  p.metrics = evaluate(adapter, llm, eval, options);
  p.metrics.flops = p.flops;
  state.curve.push_back(p);
  state.loss_sum = 0.0;
  state.loss_count = 0;
}

namespace {

std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

constexpr std::size_t kCurveColumns = 13;

std::array<double, kCurveColumns> curve_row(const CurvePoint& p) {
  const MetricsReport& m = p.metrics;
  return {static_cast<double>(p.step), static_cast<double>(p.epoch), static_cast<double>(p.flops),
          p.train_loss, m.asr_cer, m.ic_accuracy, m.ner_all, m.ner_per, m.ner_loc, m.ner_org,
          m.sr_exact, m.alignment_cosine, m.dtw_loss};
}

}  // namespace

std::string curve_to_csv(std::span<const CurvePoint> curve) {
  std::string out =
      "step,epoch,cumulative_flops,loss,asr_cer,ic_accuracy,ner_all,ner_per,ner_loc,ner_org,"
      "sr_exact,alignment_cosine,dtw_loss\n";
  for (const CurvePoint& p : curve) {
    out += std::to_string(p.step) + "," + std::to_string(p.epoch) + "," + std::to_string(p.flops);
    const auto row = curve_row(p);
    for (std::size_t k = 3; k < kCurveColumns; ++k) out += "," + csv_number(row[k]);
    out += "\n";
  }
  return out;
}

void save_train_state(const TrainState& state, const std::filesystem::path& path) {
  Checkpoint ck = adapter_to_checkpoint(state.adapter);
  ck.section = kTrainStateSection;
  auto attr = [&](const char* key, std::uint64_t v) {
    ck.attributes.emplace_back(key, static_cast<std::int64_t>(v));
  };
  attr("step", state.step);
  attr("epoch", state.epoch);
  attr("adam_step", state.adam.step);
  attr("skipped", state.skipped);
  attr("loss_count", state.loss_count);
  attr("ledger.adapter_fwd", state.ledger.adapter_fwd);
  attr("ledger.adapter_bwd", state.ledger.adapter_bwd);
  attr("ledger.loss_fwd", state.ledger.loss_fwd);
  attr("ledger.loss_bwd", state.ledger.loss_bwd);
  attr("ledger.llm_fwd", state.ledger.llm_fwd);
  attr("ledger.llm_bwd", state.ledger.llm_bwd);
  const auto params = state.adapter.tensors();
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor m("adam.m/" + params[k].name, params[k].shape), v("adam.v/" + params[k].name, params[k].shape);
    m.value = state.adam.m[k];
    v.value = state.adam.v[k];
    ck.tensors.push_back(std::move(m));
    ck.tensors.push_back(std::move(v));
  }
  Tensor loss_sum("loss_sum", {1});
  loss_sum.value[0] = state.loss_sum;
  ck.tensors.push_back(std::move(loss_sum));
  Tensor curve("curve", {state.curve.size(), kCurveColumns + 4});
  for (std::size_t r = 0; r < state.curve.size(); ++r) {
    const auto row = curve_row(state.curve[r]);
    std::copy(row.begin(), row.end(), curve.value.begin() + static_cast<std::ptrdiff_t>(r * (kCurveColumns + 4)));
    for (std::size_t t = 0; t < 4; ++t)
      curve.value[r * (kCurveColumns + 4) + kCurveColumns + t] = static_cast<double>(state.curve[r].metrics.samples[t]);
  }
  ck.tensors.push_back(std::move(curve));
  write_checkpoint(path, ck);
}

TrainState load_train_state(const std::filesystem::path& path) {
  Checkpoint ck = read_checkpoint(path);
  if (ck.section != kTrainStateSection) {
    throw FormatError("expected a '" + std::string(kTrainStateSection) + "' checkpoint, found section '" +
                      ck.section + "' in " + path.string());
  }
  Checkpoint adapter_part;
  adapter_part.section = kAdapterSection;
  adapter_part.attributes = ck.attributes;
  std::vector<Tensor> extra;
  for (Tensor& t : ck.tensors) {
    if (t.name.rfind("adam.", 0) == 0 || t.name == "curve" || t.name == "loss_sum") {
      extra.push_back(std::move(t));
    } else {
      adapter_part.tensors.push_back(std::move(t));
    }
  }
  TrainState s = TrainState::fresh(adapter_from_checkpoint(adapter_part));
  auto u = [&](const char* key) { return static_cast<std::uint64_t>(ck.require_attribute(key)); };
  s.step = u("step");
  s.epoch = u("epoch");
  s.adam.step = u("adam_step");
  s.skipped = u("skipped");
  s.loss_count = u("loss_count");
  s.ledger.adapter_fwd = u("ledger.adapter_fwd");
  s.ledger.adapter_bwd = u("ledger.adapter_bwd");
  s.ledger.loss_fwd = u("ledger.loss_fwd");
  s.ledger.loss_bwd = u("ledger.loss_bwd");
  s.ledger.llm_fwd = u("ledger.llm_fwd");
  s.ledger.llm_bwd = u("ledger.llm_bwd");
  const auto params = s.adapter.tensors();
  for (Tensor& t : extra) {
    if (t.name == "loss_sum") {
      s.loss_sum = t.value.at(0);
      continue;
    }
    if (t.name == "curve") {
      const std::size_t cols = kCurveColumns + 4;
      if (t.shape.size() != 2 || t.shape[1] != cols) throw FormatError("train state: bad curve table");
      for (std::size_t r = 0; r < t.shape[0]; ++r) {
        const double* row = t.value.data() + r * cols;
        CurvePoint p;
        p.step = static_cast<std::uint64_t>(row[0]);
        p.epoch = static_cast<std::uint64_t>(row[1]);
        p.flops = static_cast<std::uint64_t>(row[2]);
        p.train_loss = row[3];
        MetricsReport& m = p.metrics;
        m.asr_cer = row[4];
        m.ic_accuracy = row[5];
        m.ner_all = row[6];
        m.ner_per = row[7];
        m.ner_loc = row[8];
        m.ner_org = row[9];
        m.sr_exact = row[10];
        m.alignment_cosine = row[11];
        m.dtw_loss = row[12];
        m.flops = p.flops;
        for (std::size_t k = 0; k < 4; ++k) m.samples[k] = static_cast<std::size_t>(row[kCurveColumns + k]);
        s.curve.push_back(p);
      }
      continue;
    }
    const bool is_m = t.name.rfind("adam.m/", 0) == 0;
    const std::string name = t.name.substr(7);
    bool found = false;
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (params[k].name != name) continue;
      if (t.value.size() != params[k].numel()) throw ShapeError("train state: optimizer slot '" + t.name + "' has the wrong size");
      (is_m ? s.adam.m[k] : s.adam.v[k]) = std::move(t.value);
      found = true;
    }
    if (!found) throw FormatError("train state: optimizer slot '" + t.name + "' matches no parameter");
  }
  return s;
}

AdapterParams load_adapter(const std::filesystem::path& path) {
  const Checkpoint ck = read_checkpoint(path);
  if (ck.section == kTrainStateSection) return load_train_state(path).adapter;
  if (ck.section == kAdapterSection) return adapter_from_checkpoint(ck);
  throw FormatError("expected an adapter or train state checkpoint, found section '" + ck.section +
                    "' in " + path.string());
}

}  // namespace ualign
