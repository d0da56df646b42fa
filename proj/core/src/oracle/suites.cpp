#include "ualign/oracle/suites.hpp"

#include <cmath>
#include <sstream>

#include "ualign/adapter/adapter.hpp"
#include "ualign/corpus/vocab.hpp"
#include "ualign/losses/cross_entropy.hpp"
#include "ualign/losses/ctc.hpp"
#include "ualign/losses/dtw.hpp"
#include "ualign/numerics/kernels.hpp"
#include "ualign/numerics/rng.hpp"
#include "ualign/oracle/finite_difference.hpp"
#include "ualign/toyllm/llm.hpp"
#include "ualign/trainer/sequence.hpp"

namespace ualign::oracle {

namespace {

constexpr std::size_t kMaxNotes = 5;

Matrix normal_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

void note(SuiteReport& r, const std::string& text) {
  ++r.failures;
  if (r.notes.size() < kMaxNotes) r.notes.push_back(text);
}

SuiteReport from_grad(const std::string& name, const GradCheckReport& g, double tolerance) {
  SuiteReport r;
  r.name = name;
  r.trials = g.checked;
  r.max_error = g.max_rel_error;
  r.tolerance = tolerance;
  if (!g.passed(tolerance)) note(r, g.summary());
  return r;
}

void merge_into(GradCheckReport& total, const GradCheckReport& part) {
  if (total.label.empty()) total.label = part.label;
  total.merge(part);
}

AdapterConfig tiny_adapter(std::size_t layers, std::size_t out_dim) {
  AdapterConfig c;
  c.in_dim = 6;
  c.hidden_dim = 7;
  c.out_dim = out_dim;
  c.mlp_hidden = 9;
  c.conv_layers = layers;
  return c;
}

// Non-trivial affine parameters so every gradient path carries signal.
void perturb_adapter(AdapterParams& p, Rng& rng) {
  for (double& v : p.ln_gain().value) v = 1.0 + 0.2 * rng.normal();
  for (double& v : p.ln_bias().value) v = 0.1 * rng.normal();
  for (std::size_t l = 0; l < p.config().conv_layers; ++l)
    for (double& v : p.conv_bias(l).value) v = 0.1 * rng.normal();
  for (double& v : p.mlp_b1().value) v = 0.1 * rng.normal();
}

void perturb_llm(LlmParams& p, Rng& rng) {
  for (Tensor& t : p.mutable_tensors()) {
    if (t.name == "embed") continue;
    if (t.name.find("gain") != std::string::npos) {
      for (double& v : t.value) v = 1.0 + 0.2 * rng.normal();
    } else if (t.shape.size() == 1) {
      for (double& v : t.value) v = 0.1 * rng.normal();
    }
  }
}

GradCheckReport check_adapter(AdapterParams& p, Matrix& x, const Matrix& gx,
                              const std::function<double()>& loss) {
  GradCheckReport total;
  for (Tensor& t : p.tensors()) {
    if (t.name.rfind("ctc.", 0) == 0) continue;
    merge_into(total, check_gradient(t.name, t.value, t.grad, loss));
  }
  merge_into(total, check_gradient("speech", x.values(), gx.values(), loss));
  return total;
}

SuiteReport cosine_check(Rng& rng) {
  GradCheckReport total;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix h = normal_matrix(rng, 1, 8);
    const Matrix e = normal_matrix(rng, 1, 8);
    const auto g = cosine_distance_grad(h.row(0), e.row(0));
    merge_into(total, check_gradient("h", h.values(), g, [&] { return cosine_distance(h.row(0), e.row(0)); }));
  }
  return from_grad("grad/cosine", total, 1e-5);
}

SuiteReport dtw_check(Rng& rng) {
  GradCheckReport total;
  for (int accepted = 0; accepted < 5;) {
    Matrix h = normal_matrix(rng, 4, 8);
    const Matrix e = normal_matrix(rng, 3, 8);
    if (dtw_path_margin(cosine_distance_matrix(h, e)) < 1e-4) continue;
    ++accepted;
    const DtwResult r = dtw_forward(cosine_distance_matrix(h, e));
    const Matrix g = dtw_backward(r, h, e);
    merge_into(total, check_gradient("H", h.values(), g.values(),
                                     [&] { return dtw_forward(cosine_distance_matrix(h, e)).loss; }));
  }
  return from_grad("grad/dtw", total, 1e-5);
}

SuiteReport dtw_adapter_check(Rng& rng) {
  GradCheckReport total;
  for (std::size_t layers : {1u, 2u}) {
    const AdapterConfig c = tiny_adapter(layers, 8);
    AdapterParams p = adapter_init(c, rng.split("init"));
    perturb_adapter(p, rng);
    Matrix x = normal_matrix(rng, 12, c.in_dim);
    const std::size_t out_len = c.output_length(x.rows());
    Matrix e;
    for (;;) {
      e = normal_matrix(rng, out_len + 1, c.out_dim);
      if (dtw_path_margin(cosine_distance_matrix(adapter_forward(p, x).embeddings, e)) > 1e-3) break;
    }
    auto loss = [&] { return dtw_forward(cosine_distance_matrix(adapter_forward(p, x).embeddings, e)).loss; };
    p.zero_grad();
    AdapterOutput out = adapter_forward(p, x);
    const DtwResult r = dtw_forward(cosine_distance_matrix(out.embeddings, e));
    const Matrix gx = adapter_backward(p, out.tape, dtw_backward(r, out.embeddings, e));
    merge_into(total, check_adapter(p, x, gx, loss));
  }
  return from_grad("grad/dtw_adapter", total, 1e-4);
}

SuiteReport ctc_head_check(Rng& rng) {
  AdapterParams p = adapter_init(tiny_adapter(1, 8), rng.split("init"));
  p.logit_scale().value[0] = 3.0;
  Matrix table = normal_matrix(rng, 5, 8);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const double n = norm(table.row(r));
    for (double& v : table.row(r)) v /= n;
  }
  Matrix h = normal_matrix(rng, 6, 8);
  const std::vector<int> labels{1, 3, 3};
  const int blank = static_cast<int>(table.rows());
  auto loss = [&] { return ctc_forward(CtcSetup::from_logits(ctc_logits(p, h, table), blank), labels).loss; };
  p.zero_grad();
  const Matrix logits = ctc_logits(p, h, table);
  const Matrix gl = ctc_backward(CtcSetup::from_logits(logits, blank), labels);
  const Matrix gh = ctc_logits_backward(p, h, table, gl);
  GradCheckReport total;
  merge_into(total, check_gradient("H", h.values(), gh.values(), loss));
  merge_into(total, check_gradient("scale", p.logit_scale().value, p.logit_scale().grad, loss));
  merge_into(total, check_gradient("blank", p.blank_vector().value, p.blank_vector().grad, loss));
  return from_grad("grad/ctc_head", total, 1e-5);
}

SuiteReport ce_llm_adapter_check(Rng& rng) {
  LlmConfig lc;
  lc.d_model = 8;
  lc.heads = 2;
  lc.layers = 2;
  lc.ffn_mult = 2;
  lc.max_len = 40;
  LlmParams llm = llm_init(lc);
  perturb_llm(llm, rng);
  AdapterParams p = adapter_init(tiny_adapter(2, lc.d_model), rng.split("adapter"));
  perturb_adapter(p, rng);
  Matrix x = normal_matrix(rng, 13, p.config().in_dim);
  const auto prompt = prompt_tokens(Task::kIc);
  const std::vector<int> target{vocab::kIntentBase + 3};
  auto loss = [&] {
    const LlmSequence seq = build_sequence(llm, prompt, adapter_forward(p, x).embeddings, target);
    return cross_entropy(llm_forward(llm, seq.inputs).logits, seq.labels, LlmSequence::kIgnore).loss;
  };
  p.zero_grad();
  AdapterOutput out = adapter_forward(p, x);
  const LlmSequence seq = build_sequence(llm, prompt, out.embeddings, target);
  LlmOutput lo = llm_forward(llm, seq.inputs);
  const CrossEntropyResult ce = cross_entropy(lo.logits, seq.labels, LlmSequence::kIgnore);
  const Matrix gin = llm_backward_to_inputs(llm, lo.tape, ce.grad);
  const Matrix gx = adapter_backward(p, out.tape, speech_rows(seq, gin));
  return from_grad("grad/ce_llm_adapter", check_adapter(p, x, gx, loss), 1e-4);
}

}  // namespace

std::string SuiteReport::summary() const {
  std::ostringstream os;
  os << name << ": " << (trials - failures) << "/" << trials << " passed";
  if (tolerance > 0.0) os << ", max error " << max_error << " (tolerance " << tolerance << ")";
  for (const std::string& n : notes) os << "\n  " << n;
  return os.str();
}

SuiteReport dtw_suite(std::size_t trials, std::uint64_t seed) {
  SuiteReport r;
  r.name = "dtw";
  Rng rng(seed);
  for (std::size_t k = 0; k < trials; ++k) {
    const std::size_t rows = 1 + rng.below(6), cols = 1 + rng.below(6);
    Matrix cost(rows, cols);
    if (k % 5 == 4) {
      for (double& v : cost.values()) v = static_cast<double>(rng.below(3));
    } else {
      cost = cosine_distance_matrix(normal_matrix(rng, rows, 4), normal_matrix(rng, cols, 4));
    }
    const DtwResult dp = dtw_forward(cost), bf = dtw_bruteforce(cost);
    ++r.trials;
    r.max_error = std::max(r.max_error, std::abs(dp.loss - bf.loss));
    if (dp.loss != bf.loss || dp.path != bf.path) {
      note(r, "trial " + std::to_string(k) + " (" + std::to_string(rows) + "x" + std::to_string(cols) +
                  "): dp loss " + std::to_string(dp.loss) + ", brute force " + std::to_string(bf.loss));
    }
  }
  return r;
}

SuiteReport ctc_suite(std::size_t trials, std::uint64_t seed) {
  SuiteReport r;
  r.name = "ctc";
  r.tolerance = 1e-9;
  Rng rng(seed);
  while (r.trials < trials) {
    const std::size_t vocab = 2 + rng.below(3);
    const std::size_t frames = 1 + rng.below(6);
    std::vector<int> labels(1 + rng.below(3));
    for (int& l : labels) l = 1 + static_cast<int>(rng.below(vocab - 1));
    if (ctc_min_frames(labels) > frames) continue;
    const CtcSetup s = CtcSetup::from_logits(normal_matrix(rng, frames, vocab), 0);
    const double err = std::abs(ctc_forward(s, labels).loss - ctc_bruteforce(s, labels));
    ++r.trials;
    r.max_error = std::max(r.max_error, err);
    if (!(err <= r.tolerance)) note(r, "trial " + std::to_string(r.trials) + ": |diff| " + std::to_string(err));
  }
  return r;
}

std::vector<SuiteReport> grad_suites(std::uint64_t seed) {
  const Rng root(seed);
  std::vector<SuiteReport> out;
  Rng a = root.split("cosine"), b = root.split("dtw"), c = root.split("ctc_head"),
      d = root.split("dtw_adapter"), e = root.split("ce_llm_adapter");
  out.push_back(cosine_check(a));
  out.push_back(dtw_check(b));
  out.push_back(ctc_head_check(c));
  out.push_back(dtw_adapter_check(d));
  out.push_back(ce_llm_adapter_check(e));
  return out;
}

}  // namespace ualign::oracle
