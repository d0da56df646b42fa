#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ualign/numerics/layernorm.hpp"
#include "ualign/numerics/matrix.hpp"
#include "ualign/numerics/rng.hpp"
#include "ualign/numerics/tensor.hpp"

namespace ualign {

// LayerNorm -> strided 1-D convolution stack -> two-layer MLP. Maps a
// T x in_dim feature sequence to I x out_dim embeddings in the LLM space.
struct AdapterConfig {
  std::size_t in_dim = 16;
  std::size_t hidden_dim = 64;   // convolution channels
  std::size_t out_dim = 48;
  std::size_t conv_kernel = 3;
  std::size_t conv_stride = 2;
  std::size_t conv_layers = 1;
  std::size_t mlp_hidden = 96;
  std::string activation = "gelu";

  void validate() const;
  // Length after the convolution stack, or 0 when the input is too short.
  std::size_t output_length(std::size_t frames) const;
  // Shortest input that yields at least `min_out` positions.
  std::size_t min_input_length(std::size_t min_out = 1) const;

  friend bool operator==(const AdapterConfig&, const AdapterConfig&) = default;
};

class AdapterParams {
 public:
  AdapterParams() = default;
  explicit AdapterParams(AdapterConfig config);

  const AdapterConfig& config() const noexcept { return config_; }

  std::span<Tensor> tensors() noexcept { return tensors_; }
  std::span<const Tensor> tensors() const noexcept { return tensors_; }
  void zero_grad() { zero_grads(tensors_); }

  Tensor& ln_gain() { return tensors_[0]; }
  Tensor& ln_bias() { return tensors_[1]; }
  Tensor& conv_weight(std::size_t layer) { return tensors_[2 + 2 * layer]; }
  Tensor& conv_bias(std::size_t layer) { return tensors_[3 + 2 * layer]; }
  Tensor& mlp_w1() { return tensors_[mlp_base()]; }
  Tensor& mlp_b1() { return tensors_[mlp_base() + 1]; }
  Tensor& mlp_w2() { return tensors_[mlp_base() + 2]; }
  Tensor& mlp_b2() { return tensors_[mlp_base() + 3]; }
  Tensor& blank_vector() { return tensors_[mlp_base() + 4]; }
  Tensor& logit_scale() { return tensors_[mlp_base() + 5]; }

  const Tensor& ln_gain() const { return tensors_[0]; }
  const Tensor& ln_bias() const { return tensors_[1]; }
  const Tensor& conv_weight(std::size_t layer) const { return tensors_[2 + 2 * layer]; }
  const Tensor& conv_bias(std::size_t layer) const { return tensors_[3 + 2 * layer]; }
  const Tensor& mlp_w1() const { return tensors_[mlp_base()]; }
  const Tensor& mlp_b1() const { return tensors_[mlp_base() + 1]; }
  const Tensor& mlp_w2() const { return tensors_[mlp_base() + 2]; }
  const Tensor& mlp_b2() const { return tensors_[mlp_base() + 3]; }
  const Tensor& blank_vector() const { return tensors_[mlp_base() + 4]; }
  const Tensor& logit_scale() const { return tensors_[mlp_base() + 5]; }

  // Expected tensor names and shapes for a config, in storage order.
  static std::vector<Tensor> layout(const AdapterConfig& config);

 private:
  std::size_t mlp_base() const noexcept { return 2 + 2 * config_.conv_layers; }

  AdapterConfig config_;
  std::vector<Tensor> tensors_;
};

// Cached activations of one forward pass; backward consumes it once.
struct AdapterTape {
  std::size_t frames = 0;
  LayerNormCache norm;
  std::vector<Matrix> conv_patches;   // im2col input of each conv layer
  std::vector<Matrix> conv_pre;       // pre-activation output of each conv layer
  Matrix mlp_in;
  Matrix mlp_pre;
  Matrix mlp_hidden;
  bool consumed = false;
};

struct AdapterOutput {
  Matrix embeddings;   // I x out_dim
  AdapterTape tape;
};

AdapterParams adapter_init(const AdapterConfig& config, Rng rng);

AdapterOutput adapter_forward(const AdapterParams& params, const Matrix& speech);

// Reverse mode of adapter_forward. Parameter gradients accumulate into the
// params' grad buffers; the return value is dL/dspeech.
Matrix adapter_backward(AdapterParams& params, AdapterTape& tape, const Matrix& grad_h);

// CTC head: logit(i, v) = logit_scale * cos(h_i, table_v) for each table row,
// plus a final blank column scored against the learned blank vector.
Matrix ctc_logits(const AdapterParams& params, const Matrix& h, const Matrix& embed_table);

// Returns dL/dH; accumulates into blank_vector and logit_scale grads.
Matrix ctc_logits_backward(AdapterParams& params, const Matrix& h, const Matrix& embed_table,
                           const Matrix& grad_logits);

}  // namespace ualign
