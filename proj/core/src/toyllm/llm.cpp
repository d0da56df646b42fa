#include "ualign/toyllm/llm.hpp"

#include <cmath>
#include <limits>

#include "ualign/numerics/error.hpp"
#include "ualign/numerics/kernels.hpp"
#include "ualign/numerics/rng.hpp"

namespace ualign {

void LlmConfig::validate() const {
  if (vocab_size < 1 || d_model < 1 || heads < 1 || ffn_mult < 1 || max_len < 1) {
    throw InvalidArgument("LlmConfig: vocab_size, d_model, heads, ffn_mult and max_len must be >= 1");
  }
  if (d_model % heads != 0) {
    throw InvalidArgument("LlmConfig: d_model " + std::to_string(d_model) +
                          " is not divisible by heads " + std::to_string(heads));
  }
}

std::vector<Tensor> LlmParams::layout(const LlmConfig& c) {
  using S = std::vector<std::size_t>;
  const std::size_t d = c.d_model, f = c.ffn_dim();
  std::vector<Tensor> t;
  t.emplace_back("embed", S{c.vocab_size, d});
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    t.emplace_back(p + "ln1.gain", S{d});
    t.emplace_back(p + "ln1.bias", S{d});
    t.emplace_back(p + "wq", S{d, d});
    t.emplace_back(p + "wk", S{d, d});
    t.emplace_back(p + "wv", S{d, d});
    t.emplace_back(p + "wo", S{d, d});
    t.emplace_back(p + "ln2.gain", S{d});
    t.emplace_back(p + "ln2.bias", S{d});
    t.emplace_back(p + "w1", S{d, f});
    t.emplace_back(p + "b1", S{f});
    t.emplace_back(p + "w2", S{f, d});
    t.emplace_back(p + "b2", S{d});
  }
  t.emplace_back("final.ln.gain", S{d});
  t.emplace_back("final.ln.bias", S{d});
  t.emplace_back("out.weight", S{d, c.vocab_size});
  t.emplace_back("out.bias", S{c.vocab_size});
  return t;
}

LlmParams::LlmParams(LlmConfig config) : config_(config) {
  config_.validate();
  tensors_ = layout(config_);
}

LlmParams llm_init(const LlmConfig& config) {
  LlmParams p(config);
  Rng root(config.seed);
  for (auto& t : p.mutable_tensors()) {
    Rng rng = root.split(t.name);
    const bool is_gain = t.name.ends_with(".gain");
    if (is_gain) {
      std::fill(t.value.begin(), t.value.end(), 1.0);
    } else if (t.shape.size() == 2) {
      const double bound = std::sqrt(6.0 / static_cast<double>(t.shape[0] + t.shape[1]));
      for (double& v : t.value) v = rng.uniform(-bound, bound);
    }
  }
  Tensor& embed = p.mutable_tensors()[0];
  const std::size_t d = config.d_model;
  for (std::size_t r = 0; r < config.vocab_size; ++r) {
    double* row = embed.value.data() + r * d;
    const double n = norm(std::span<const double>(row, d));
    for (std::size_t k = 0; k < d; ++k) row[k] /= n;
  }
  return p;
}

Matrix embed_tokens(const LlmParams& params, std::span<const int> tokens) {
  const LlmConfig& c = params.config();
  Matrix out(tokens.size(), c.d_model);
  const auto& table = params.embedding().value;
  for (std::size_t s = 0; s < tokens.size(); ++s) {
    const int id = tokens[s];
    if (id < 0 || static_cast<std::size_t>(id) >= c.vocab_size) {
      throw InvalidArgument("embed_tokens: token id " + std::to_string(id) +
                            " outside vocabulary of " + std::to_string(c.vocab_size));
    }
    std::copy_n(table.data() + static_cast<std::size_t>(id) * c.d_model, c.d_model,
                out.row(s).begin());
  }
  return out;
}

Matrix sinusoidal_positions(std::size_t length, std::size_t d_model) {
  // Amplitude sqrt(2/d) gives unit-norm rows, matching the unit-norm token
  // embeddings so position does not swamp content. The small base keeps
  // neighbouring positions distinguishable at d = 48 for short sequences.
  const double amp = std::sqrt(2.0 / static_cast<double>(d_model));
  Matrix pos(length, d_model);
  for (std::size_t s = 0; s < length; ++s) {
    for (std::size_t k = 0; k < d_model; k += 2) {
      const double freq = std::pow(kPositionBase, -static_cast<double>(k) / static_cast<double>(d_model));
      pos(s, k) = amp * std::sin(static_cast<double>(s) * freq);
      if (k + 1 < d_model) pos(s, k + 1) = amp * std::cos(static_cast<double>(s) * freq);
    }
  }
  return pos;
}

namespace {

void add_bias(Matrix& m, std::span<const double> bias) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t k = 0; k < bias.size(); ++k) row[k] += bias[k];
  }
}

void add_colsum(const Matrix& m, std::vector<double>& out) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += row[k];
  }
}

void add_into(std::vector<double>& dst, const Matrix& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src.data()[i];
}

void add_inplace(Matrix& dst, const Matrix& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += src.data()[i];
}

// Multi-head scaled dot-product attention over q, k, v (each S x d).
void attention_forward(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t heads,
                       bool causal, std::vector<Matrix>& attn, Matrix& out) {
  const std::size_t len = q.rows(), d = q.cols(), dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  out = Matrix(len, d);
  attn.assign(heads, Matrix(len, len));
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    Matrix& a = attn[h];
    for (std::size_t s = 0; s < len; ++s) {
      const std::size_t limit = causal ? s + 1 : len;
      const double* qs = q.data() + s * d + off;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < limit; ++t) {
        const double* kt = k.data() + t * d + off;
        double dotv = 0.0;
        for (std::size_t c = 0; c < dh; ++c) dotv += qs[c] * kt[c];
        a(s, t) = dotv * scale;
        mx = std::max(mx, a(s, t));
      }
      double z = 0.0;
      for (std::size_t t = 0; t < limit; ++t) {
        a(s, t) = std::exp(a(s, t) - mx);
        z += a(s, t);
      }
      double* os = out.data() + s * d + off;
      for (std::size_t t = 0; t < limit; ++t) {
        a(s, t) /= z;
        const double w = a(s, t);
        const double* vt = v.data() + t * d + off;
        for (std::size_t c = 0; c < dh; ++c) os[c] += w * vt[c];
      }
    }
  }
}

void attention_backward(const LlmLayerTape& lt, std::size_t heads, bool causal, const Matrix& d_out,
                        Matrix& dq, Matrix& dk, Matrix& dv) {
  const std::size_t len = lt.q.rows(), d = lt.q.cols(), dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  dq = Matrix(len, d);
  dk = Matrix(len, d);
  dv = Matrix(len, d);
  std::vector<double> da(len);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    const Matrix& a = lt.attn[h];
    for (std::size_t s = 0; s < len; ++s) {
      const std::size_t limit = causal ? s + 1 : len;
      const double* gs = d_out.data() + s * d + off;
      double weighted = 0.0;
      for (std::size_t t = 0; t < limit; ++t) {
        const double* vt = lt.v.data() + t * d + off;
        double dotv = 0.0;
        for (std::size_t c = 0; c < dh; ++c) dotv += gs[c] * vt[c];
        da[t] = dotv;
        weighted += dotv * a(s, t);
        double* dvt = dv.data() + t * d + off;
        const double w = a(s, t);
        for (std::size_t c = 0; c < dh; ++c) dvt[c] += w * gs[c];
      }
      const double* qs = lt.q.data() + s * d + off;
      double* dqs = dq.data() + s * d + off;
      for (std::size_t t = 0; t < limit; ++t) {
        const double dscore = a(s, t) * (da[t] - weighted) * scale;
        if (dscore == 0.0) continue;
        const double* kt = lt.k.data() + t * d + off;
        double* dkt = dk.data() + t * d + off;
        for (std::size_t c = 0; c < dh; ++c) {
          dqs[c] += dscore * kt[c];
          dkt[c] += dscore * qs[c];
        }
      }
    }
  }
}

}  // namespace

LlmOutput llm_forward(const LlmParams& params, const Matrix& input_embeds, bool causal) {
  const LlmConfig& c = params.config();
  if (input_embeds.cols() != c.d_model) {
    throw ShapeError("llm_forward: inputs are " + input_embeds.shape_string() +
                     " but d_model is " + std::to_string(c.d_model));
  }
  if (input_embeds.rows() > c.max_len) {
    throw InvalidArgument("llm_forward: sequence length " + std::to_string(input_embeds.rows()) +
                          " exceeds max_len " + std::to_string(c.max_len));
  }
  if (input_embeds.rows() == 0) throw InvalidArgument("llm_forward: empty sequence");
  LlmOutput out;
  LlmTape& tape = out.tape;
  tape.causal = causal;
  Matrix x = input_embeds;
  add_inplace(x, sinusoidal_positions(x.rows(), c.d_model));
  using P = LlmParams;
  for (std::size_t l = 0; l < c.layers; ++l) {
    LlmLayerTape lt;
    lt.x_in = x;
    lt.a = layer_norm_forward(x, params.layer(l, P::kLn1Gain).value,
                              params.layer(l, P::kLn1Bias).value, lt.ln1);
    gemm_nn(lt.a, params.layer(l, P::kWq).view(), lt.q);
    gemm_nn(lt.a, params.layer(l, P::kWk).view(), lt.k);
    gemm_nn(lt.a, params.layer(l, P::kWv).view(), lt.v);
    attention_forward(lt.q, lt.k, lt.v, c.heads, causal, lt.attn, lt.o);
    gemm_nn(lt.o, params.layer(l, P::kWo).view(), x, true);
    lt.x_mid = x;
    lt.b = layer_norm_forward(x, params.layer(l, P::kLn2Gain).value,
                              params.layer(l, P::kLn2Bias).value, lt.ln2);
    gemm_nn(lt.b, params.layer(l, P::kW1).view(), lt.u);
    add_bias(lt.u, params.layer(l, P::kB1).value);
    lt.g = Matrix(lt.u.rows(), lt.u.cols());
    for (std::size_t i = 0; i < lt.u.size(); ++i) lt.g.data()[i] = gelu(lt.u.data()[i]);
    gemm_nn(lt.g, params.layer(l, P::kW2).view(), x, true);
    add_bias(x, params.layer(l, P::kB2).value);
    tape.layers.push_back(std::move(lt));
  }
  tape.final_out =
      layer_norm_forward(x, params.final_gain().value, params.final_bias().value, tape.final_ln);
  gemm_nn(tape.final_out, params.out_weight().view(), out.logits);
  add_bias(out.logits, params.out_bias().value);
  return out;
}

Matrix llm_backward(const LlmParams& params, LlmTape& tape, const Matrix& grad_logits,
                    std::span<Tensor> param_grads) {
  if (tape.consumed) throw InvalidArgument("llm_backward: tape has already been consumed");
  const LlmConfig& c = params.config();
  if (grad_logits.rows() != tape.final_out.rows() || grad_logits.cols() != c.vocab_size) {
    throw ShapeError("llm_backward: gradient is " + grad_logits.shape_string() + ", expected " +
                     std::to_string(tape.final_out.rows()) + "x" + std::to_string(c.vocab_size));
  }
  const bool want_params = !param_grads.empty();
  if (want_params && param_grads.size() != params.tensors().size()) {
    throw ShapeError("llm_backward: parameter gradient buffer does not mirror the model");
  }
  tape.consumed = true;

  // Scratch buffers stand in for parameter grads when only inputs are wanted.
  std::vector<double> sink_gain(c.d_model), sink_bias(c.d_model);
  auto grad_of = [&](std::size_t index) -> std::vector<double>* {
    return want_params ? &param_grads[index].grad : nullptr;
  };
  auto ln_back = [&](const Matrix& dy, const Tensor& gain, const LayerNormCache& cache,
                     std::size_t gain_index) {
    if (want_params) {
      return layer_norm_backward(dy, gain.value, cache, param_grads[gain_index].grad,
                                 param_grads[gain_index + 1].grad);
    }
    return layer_norm_backward(dy, gain.value, cache, sink_gain, sink_bias);
  };

  Matrix scratch;
  const std::size_t fb = params.final_base();
  if (want_params) {
    gemm_tn(tape.final_out, grad_logits, scratch);
    add_into(*grad_of(fb + 2), scratch);
    add_colsum(grad_logits, *grad_of(fb + 3));
  }
  Matrix dfinal;
  gemm_nt(grad_logits, params.out_weight().view(), dfinal);
  Matrix dx = ln_back(dfinal, params.final_gain(), tape.final_ln, fb);

  using P = LlmParams;
  for (std::size_t l = c.layers; l-- > 0;) {
    const LlmLayerTape& lt = tape.layers[l];
    // Feed-forward block.
    Matrix dg;
    gemm_nt(dx, params.layer(l, P::kW2).view(), dg);
    if (want_params) {
      gemm_tn(lt.g, dx, scratch);
      add_into(*grad_of(params.layer_index(l, P::kW2)), scratch);
      add_colsum(dx, *grad_of(params.layer_index(l, P::kB2)));
    }
    for (std::size_t i = 0; i < dg.size(); ++i) dg.data()[i] *= gelu_grad(lt.u.data()[i]);
    Matrix db;
    gemm_nt(dg, params.layer(l, P::kW1).view(), db);
    if (want_params) {
      gemm_tn(lt.b, dg, scratch);
      add_into(*grad_of(params.layer_index(l, P::kW1)), scratch);
      add_colsum(dg, *grad_of(params.layer_index(l, P::kB1)));
    }
    add_inplace(dx, ln_back(db, params.layer(l, P::kLn2Gain), lt.ln2,
                            params.layer_index(l, P::kLn2Gain)));

    // Attention block.
    Matrix d_o;
    gemm_nt(dx, params.layer(l, P::kWo).view(), d_o);
    if (want_params) {
      gemm_tn(lt.o, dx, scratch);
      add_into(*grad_of(params.layer_index(l, P::kWo)), scratch);
    }
    Matrix dq, dk, dv;
    attention_backward(lt, c.heads, tape.causal, d_o, dq, dk, dv);
    Matrix da;
    gemm_nt(dq, params.layer(l, P::kWq).view(), da);
    gemm_nt(dk, params.layer(l, P::kWk).view(), da, true);
    gemm_nt(dv, params.layer(l, P::kWv).view(), da, true);
    if (want_params) {
      gemm_tn(lt.a, dq, scratch);
      add_into(*grad_of(params.layer_index(l, P::kWq)), scratch);
      gemm_tn(lt.a, dk, scratch);
      add_into(*grad_of(params.layer_index(l, P::kWk)), scratch);
      gemm_tn(lt.a, dv, scratch);
      add_into(*grad_of(params.layer_index(l, P::kWv)), scratch);
    }
    add_inplace(dx, ln_back(da, params.layer(l, P::kLn1Gain), lt.ln1,
                            params.layer_index(l, P::kLn1Gain)));
  }
  return dx;
}

Matrix llm_backward_to_inputs(const LlmParams& params, LlmTape& tape, const Matrix& grad_logits) {
  return llm_backward(params, tape, grad_logits);
}

std::uint64_t llm_flops(const LlmConfig& config, std::size_t length, Direction direction) {
  const std::uint64_t s = length, d = config.d_model, f = config.ffn_dim(), v = config.vocab_size;
  const std::uint64_t per_layer = 8 * s * d * d + 4 * s * s * d + 4 * s * d * f;
  const std::uint64_t forward = config.layers * per_layer + 2 * s * d * v;
  return direction == Direction::kForward ? forward : 2 * forward;
}

Checkpoint llm_to_checkpoint(const LlmParams& params) {
  const LlmConfig& c = params.config();
  Checkpoint ckpt;
  ckpt.section = kLlmSection;
  auto attr = [&](const char* k, std::uint64_t v) {
    ckpt.attributes.emplace_back(k, static_cast<std::int64_t>(v));
  };
  attr("vocab_size", c.vocab_size);
  attr("d_model", c.d_model);
  attr("layers", c.layers);
  attr("heads", c.heads);
  attr("ffn_mult", c.ffn_mult);
  attr("max_len", c.max_len);
  attr("seed", c.seed);
  ckpt.tensors.assign(params.tensors().begin(), params.tensors().end());
  return ckpt;
}

LlmParams llm_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.section != kLlmSection) {
    throw FormatError("expected checkpoint section '" + std::string(kLlmSection) + "', found '" +
                      ckpt.section + "'");
  }
  LlmConfig c;
  auto get = [&](const char* k) { return static_cast<std::size_t>(ckpt.require_attribute(k)); };
  c.vocab_size = get("vocab_size");
  c.d_model = get("d_model");
  c.layers = get("layers");
  c.heads = get("heads");
  c.ffn_mult = get("ffn_mult");
  c.max_len = get("max_len");
  c.seed = static_cast<std::uint64_t>(ckpt.require_attribute("seed"));
  LlmParams params(c);
  auto tensors = params.mutable_tensors();
  if (ckpt.tensors.size() != tensors.size()) {
    throw ShapeError("toyllm checkpoint: expected " + std::to_string(tensors.size()) +
                     " tensors, found " + std::to_string(ckpt.tensors.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const Tensor& src = ckpt.tensors[i];
    if (src.name != tensors[i].name || src.shape != tensors[i].shape) {
      throw ShapeError("toyllm checkpoint tensor " + std::to_string(i) + ": expected '" +
                       tensors[i].name + "' " + tensors[i].shape_string() + ", found '" +
                       src.name + "' " + src.shape_string());
    }
    tensors[i].value = src.value;
  }
  return params;
}

void llm_save(const LlmParams& params, const std::filesystem::path& path) {
  write_checkpoint(path, llm_to_checkpoint(params));
}

LlmParams llm_load(const std::filesystem::path& path) {
  return llm_from_checkpoint(read_checkpoint(path));
}

}  // namespace ualign
