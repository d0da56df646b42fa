#include "ualign/adapter/adapter.hpp"

#include <cmath>

#include "ualign/numerics/error.hpp"
#include "ualign/numerics/kernels.hpp"

namespace ualign {

void AdapterConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v < 1) throw InvalidArgument(std::string("AdapterConfig.") + name + " must be >= 1");
  };
  positive(in_dim, "in_dim");
  positive(hidden_dim, "hidden_dim");
  positive(out_dim, "out_dim");
  positive(conv_kernel, "conv_kernel");
  positive(conv_stride, "conv_stride");
  positive(conv_layers, "conv_layers");
  positive(mlp_hidden, "mlp_hidden");
  if (activation != "gelu") {
    throw InvalidArgument("AdapterConfig.activation '" + activation + "' is not supported");
  }
}

std::size_t AdapterConfig::output_length(std::size_t frames) const {
  std::size_t len = frames;
  for (std::size_t l = 0; l < conv_layers; ++l) {
    if (len < conv_kernel) return 0;
    len = (len - conv_kernel) / conv_stride + 1;
  }
  return len;
}

std::size_t AdapterConfig::min_input_length(std::size_t min_out) const {
  std::size_t len = std::max<std::size_t>(min_out, 1);
  for (std::size_t l = 0; l < conv_layers; ++l) len = (len - 1) * conv_stride + conv_kernel;
  return len;
}

std::vector<Tensor> AdapterParams::layout(const AdapterConfig& c) {
  std::vector<Tensor> t;
  t.emplace_back("ln.gain", std::vector<std::size_t>{c.in_dim});
  t.emplace_back("ln.bias", std::vector<std::size_t>{c.in_dim});
  for (std::size_t l = 0; l < c.conv_layers; ++l) {
    const std::size_t in_ch = l == 0 ? c.in_dim : c.hidden_dim;
    const std::string p = "conv" + std::to_string(l);
    t.emplace_back(p + ".weight", std::vector<std::size_t>{c.hidden_dim, in_ch, c.conv_kernel});
    t.emplace_back(p + ".bias", std::vector<std::size_t>{c.hidden_dim});
  }
  t.emplace_back("mlp.w1", std::vector<std::size_t>{c.hidden_dim, c.mlp_hidden});
  t.emplace_back("mlp.b1", std::vector<std::size_t>{c.mlp_hidden});
  t.emplace_back("mlp.w2", std::vector<std::size_t>{c.mlp_hidden, c.out_dim});
  t.emplace_back("mlp.b2", std::vector<std::size_t>{c.out_dim});
  t.emplace_back("ctc.blank", std::vector<std::size_t>{c.out_dim});
  t.emplace_back("ctc.logit_scale", std::vector<std::size_t>{1});
  return t;
}

AdapterParams::AdapterParams(AdapterConfig config) : config_(std::move(config)) {
  config_.validate();
  tensors_ = layout(config_);
}

namespace {

void fill_uniform(Tensor& t, double bound, Rng& rng) {
  for (double& v : t.value) v = rng.uniform(-bound, bound);
}

double glorot(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

// im2col: patch(t, c * k + u) = x(t * stride + u, c).
Matrix im2col(const Matrix& x, std::size_t kernel, std::size_t stride, std::size_t out_len) {
  const std::size_t ch = x.cols();
  Matrix patches(out_len, ch * kernel);
  for (std::size_t t = 0; t < out_len; ++t) {
    auto p = patches.row(t);
    for (std::size_t u = 0; u < kernel; ++u) {
      auto xr = x.row(t * stride + u);
      for (std::size_t c = 0; c < ch; ++c) p[c * kernel + u] = xr[c];
    }
  }
  return patches;
}

Matrix col2im(const Matrix& dpatches, std::size_t kernel, std::size_t stride, std::size_t in_len,
              std::size_t ch) {
  Matrix dx(in_len, ch);
  for (std::size_t t = 0; t < dpatches.rows(); ++t) {
    auto p = dpatches.row(t);
    for (std::size_t u = 0; u < kernel; ++u) {
      auto xr = dx.row(t * stride + u);
      for (std::size_t c = 0; c < ch; ++c) xr[c] += p[c * kernel + u];
    }
  }
  return dx;
}

void add_bias(Matrix& m, std::span<const double> bias) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t k = 0; k < bias.size(); ++k) row[k] += bias[k];
  }
}

// Column sums are formed locally and then added, so repeated backward
// calls accumulate exactly (g + g == 2g).
void accumulate_colsum(const Matrix& m, std::span<double> out) {
  std::vector<double> sum(out.size(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t k = 0; k < out.size(); ++k) sum[k] += row[k];
  }
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += sum[k];
}

Matrix apply_gelu(const Matrix& pre) {
  Matrix out(pre.rows(), pre.cols());
  for (std::size_t i = 0; i < pre.size(); ++i) out.data()[i] = gelu(pre.data()[i]);
  return out;
}

void gelu_backward_inplace(Matrix& grad, const Matrix& pre) {
  for (std::size_t i = 0; i < pre.size(); ++i) grad.data()[i] *= gelu_grad(pre.data()[i]);
}

void add_into(std::vector<double>& dst, const Matrix& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src.data()[i];
}

}  // namespace

AdapterParams adapter_init(const AdapterConfig& config, Rng rng) {
  AdapterParams p(config);
  std::fill(p.ln_gain().value.begin(), p.ln_gain().value.end(), 1.0);
  for (std::size_t l = 0; l < config.conv_layers; ++l) {
    const std::size_t in_ch = l == 0 ? config.in_dim : config.hidden_dim;
    Rng r = rng.split("conv").split(l);
    fill_uniform(p.conv_weight(l),
                 glorot(in_ch * config.conv_kernel, config.hidden_dim * config.conv_kernel), r);
  }
  Rng r1 = rng.split("mlp.w1");
  fill_uniform(p.mlp_w1(), glorot(config.hidden_dim, config.mlp_hidden), r1);
  Rng r2 = rng.split("mlp.w2");
  fill_uniform(p.mlp_w2(), glorot(config.mlp_hidden, config.out_dim), r2);
  Rng rb = rng.split("ctc.blank");
  fill_uniform(p.blank_vector(), glorot(1, config.out_dim), rb);
  p.logit_scale().value[0] = 10.0;
  return p;
}

AdapterOutput adapter_forward(const AdapterParams& params, const Matrix& speech) {
  const AdapterConfig& cfg = params.config();
  if (speech.cols() != cfg.in_dim) {
    throw ShapeError("adapter_forward: speech is " + speech.shape_string() + " but in_dim is " +
                     std::to_string(cfg.in_dim));
  }
  if (cfg.output_length(speech.rows()) < 1) {
    throw InvalidArgument("adapter_forward: " + std::to_string(speech.rows()) +
                          " frames is too short; need at least T = " +
                          std::to_string(cfg.min_input_length()));
  }
  AdapterOutput out;
  AdapterTape& tape = out.tape;
  tape.frames = speech.rows();
  Matrix x = layer_norm_forward(speech, params.ln_gain().value, params.ln_bias().value, tape.norm);
  for (std::size_t l = 0; l < cfg.conv_layers; ++l) {
    const std::size_t len = (x.rows() - cfg.conv_kernel) / cfg.conv_stride + 1;
    Matrix patches = im2col(x, cfg.conv_kernel, cfg.conv_stride, len);
    const Tensor& w = params.conv_weight(l);
    Matrix pre;
    gemm_nt(patches, w.view(), pre);
    add_bias(pre, params.conv_bias(l).value);
    x = apply_gelu(pre);
    tape.conv_patches.push_back(std::move(patches));
    tape.conv_pre.push_back(std::move(pre));
  }
  tape.mlp_in = x;
  gemm_nn(x, params.mlp_w1().view(), tape.mlp_pre);
  add_bias(tape.mlp_pre, params.mlp_b1().value);
  tape.mlp_hidden = apply_gelu(tape.mlp_pre);
  gemm_nn(tape.mlp_hidden, params.mlp_w2().view(), out.embeddings);
  add_bias(out.embeddings, params.mlp_b2().value);
  return out;
}

Matrix adapter_backward(AdapterParams& params, AdapterTape& tape, const Matrix& grad_h) {
  if (tape.consumed) throw InvalidArgument("adapter_backward: tape has already been consumed");
  const AdapterConfig& cfg = params.config();
  if (grad_h.rows() != tape.mlp_hidden.rows() || grad_h.cols() != cfg.out_dim) {
    throw ShapeError("adapter_backward: grad_H is " + grad_h.shape_string() + ", expected " +
                     std::to_string(tape.mlp_hidden.rows()) + "x" + std::to_string(cfg.out_dim));
  }
  tape.consumed = true;

  Matrix dw;
  gemm_tn(tape.mlp_hidden, grad_h, dw);
  add_into(params.mlp_w2().grad, dw);
  accumulate_colsum(grad_h, params.mlp_b2().grad);
  Matrix dhidden;
  gemm_nt(grad_h, params.mlp_w2().view(), dhidden);
  gelu_backward_inplace(dhidden, tape.mlp_pre);
  gemm_tn(tape.mlp_in, dhidden, dw);
  add_into(params.mlp_w1().grad, dw);
  accumulate_colsum(dhidden, params.mlp_b1().grad);
  Matrix dx;
  gemm_nt(dhidden, params.mlp_w1().view(), dx);

  for (std::size_t l = cfg.conv_layers; l-- > 0;) {
    gelu_backward_inplace(dx, tape.conv_pre[l]);
    Tensor& w = params.conv_weight(l);
    const std::size_t in_ch = w.shape[1];
    gemm_tn(dx, tape.conv_patches[l], dw);
    add_into(w.grad, dw);
    accumulate_colsum(dx, params.conv_bias(l).grad);
    Matrix dpatches;
    gemm_nn(dx, w.view(), dpatches);
    const std::size_t in_len = l == 0 ? tape.frames : tape.conv_pre[l - 1].rows();
    dx = col2im(dpatches, cfg.conv_kernel, cfg.conv_stride, in_len, in_ch);
  }
  std::vector<double> dgain(cfg.in_dim, 0.0), dbias(cfg.in_dim, 0.0);
  Matrix dspeech = layer_norm_backward(dx, params.ln_gain().value, tape.norm, dgain, dbias);
  for (std::size_t k = 0; k < cfg.in_dim; ++k) {
    params.ln_gain().grad[k] += dgain[k];
    params.ln_bias().grad[k] += dbias[k];
  }
  return dspeech;
}

namespace {

void check_head(const AdapterParams& params, const Matrix& h, const Matrix& table) {
  const std::size_t d = params.config().out_dim;
  if (h.cols() != d || table.cols() != d) {
    throw ShapeError("ctc_logits: H is " + h.shape_string() + " and table is " +
                     table.shape_string() + " but out_dim is " + std::to_string(d));
  }
}

double cosine(std::span<const double> a, std::span<const double> b) {
  return 1.0 - cosine_distance(a, b);
}

}  // namespace

Matrix ctc_logits(const AdapterParams& params, const Matrix& h, const Matrix& embed_table) {
  check_head(params, h, embed_table);
  const double scale = params.logit_scale().value[0];
  const std::size_t vocab = embed_table.rows();
  Matrix cos_matrix = cosine_distance_matrix(h, embed_table);
  Matrix logits(h.rows(), vocab + 1);
  for (std::size_t i = 0; i < h.rows(); ++i) {
    for (std::size_t v = 0; v < vocab; ++v) logits(i, v) = scale * (1.0 - cos_matrix(i, v));
    logits(i, vocab) = scale * cosine(h.row(i), params.blank_vector().value);
  }
  return logits;
}

Matrix ctc_logits_backward(AdapterParams& params, const Matrix& h, const Matrix& embed_table,
                           const Matrix& grad_logits) {
  check_head(params, h, embed_table);
  const std::size_t vocab = embed_table.rows();
  if (grad_logits.rows() != h.rows() || grad_logits.cols() != vocab + 1) {
    throw ShapeError("ctc_logits_backward: gradient is " + grad_logits.shape_string() +
                     ", expected " + std::to_string(h.rows()) + "x" + std::to_string(vocab + 1));
  }
  const double scale = params.logit_scale().value[0];
  const std::span<const double> blank = params.blank_vector().value;
  Matrix grad_h(h.rows(), h.cols());
  std::vector<double> dblank(blank.size(), 0.0);
  double dscale = 0.0;
  for (std::size_t i = 0; i < h.rows(); ++i) {
    auto gh = grad_h.row(i);
    for (std::size_t v = 0; v <= vocab; ++v) {
      const double g = grad_logits(i, v);
      if (g == 0.0) continue;
      const auto other = v < vocab ? embed_table.row(v) : blank;
      dscale += g * cosine(h.row(i), other);
      const auto dh = cosine_distance_grad(h.row(i), other);
      for (std::size_t k = 0; k < gh.size(); ++k) gh[k] -= g * scale * dh[k];
      if (v == vocab) {
        const auto db = cosine_distance_grad(blank, h.row(i));
        for (std::size_t k = 0; k < db.size(); ++k) dblank[k] -= g * scale * db[k];
      }
    }
  }
  for (std::size_t k = 0; k < dblank.size(); ++k) params.blank_vector().grad[k] += dblank[k];
  params.logit_scale().grad[0] += dscale;
  return grad_h;
}

}  // namespace ualign
