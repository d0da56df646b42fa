#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ualign/adapter/checkpoint.hpp"
#include "ualign/numerics/layernorm.hpp"
#include "ualign/numerics/matrix.hpp"
#include "ualign/numerics/tensor.hpp"

namespace ualign {

// A small pre-norm causal decoder that stands in for the frozen LLM.
struct LlmConfig {
  std::size_t vocab_size = 91;
  std::size_t d_model = 48;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ffn_mult = 4;
  std::size_t max_len = 256;
  std::uint64_t seed = 1234;

  void validate() const;
  std::size_t ffn_dim() const noexcept { return ffn_mult * d_model; }
  friend bool operator==(const LlmConfig&, const LlmConfig&) = default;
};

class LlmParams {
 public:
  static constexpr std::size_t kPerLayer = 12;
  enum LayerSlot : std::size_t {
    kLn1Gain, kLn1Bias, kWq, kWk, kWv, kWo, kLn2Gain, kLn2Bias, kW1, kB1, kW2, kB2
  };

  LlmParams() = default;
  explicit LlmParams(LlmConfig config);

  const LlmConfig& config() const noexcept { return config_; }
  std::span<const Tensor> tensors() const noexcept { return tensors_; }
  // Mutable access exists for building the model (init, pretraining, load).
  std::span<Tensor> mutable_tensors() noexcept { return tensors_; }

  const Tensor& embedding() const { return tensors_[0]; }
  const Tensor& layer(std::size_t l, LayerSlot slot) const {
    return tensors_[1 + l * kPerLayer + slot];
  }
  const Tensor& final_gain() const { return tensors_[final_base()]; }
  const Tensor& final_bias() const { return tensors_[final_base() + 1]; }
  const Tensor& out_weight() const { return tensors_[final_base() + 2]; }
  const Tensor& out_bias() const { return tensors_[final_base() + 3]; }

  std::size_t layer_index(std::size_t l, LayerSlot slot) const { return 1 + l * kPerLayer + slot; }
  std::size_t final_base() const noexcept { return 1 + config_.layers * kPerLayer; }

  Matrix embedding_table() const { return embedding().as_matrix(); }
  std::string digest() const { return tensor_digest(tensors_); }

  static std::vector<Tensor> layout(const LlmConfig& config);

 private:
  LlmConfig config_;
  std::vector<Tensor> tensors_;
};

struct LlmLayerTape {
  Matrix x_in;
  LayerNormCache ln1;
  Matrix a;
  Matrix q, k, v;
  std::vector<Matrix> attn;   // per head, S x S softmax weights
  Matrix o;                   // concatenated head outputs
  Matrix x_mid;
  LayerNormCache ln2;
  Matrix b;
  Matrix u;                   // FFN pre-activation
  Matrix g;                   // GELU(u)
};

struct LlmTape {
  bool causal = true;
  std::vector<LlmLayerTape> layers;
  LayerNormCache final_ln;
  Matrix final_out;
  bool consumed = false;
};

struct LlmOutput {
  Matrix logits;   // S x vocab
  LlmTape tape;
};

// Seeded Glorot init; embedding rows normalised to unit length.
LlmParams llm_init(const LlmConfig& config);

Matrix embed_tokens(const LlmParams& params, std::span<const int> tokens);

inline constexpr double kPositionBase = 30.0;

// Sinusoidal position table, S x d, scaled to unit-norm rows.
Matrix sinusoidal_positions(std::size_t length, std::size_t d_model);

LlmOutput llm_forward(const LlmParams& params, const Matrix& input_embeds, bool causal = true);

// Reverse mode with respect to the input embeddings. When `param_grads` is
// non-empty it must mirror params.tensors(); parameter gradients are then
// accumulated into its grad buffers (used only while building the model).
Matrix llm_backward(const LlmParams& params, LlmTape& tape, const Matrix& grad_logits,
                    std::span<Tensor> param_grads = {});

Matrix llm_backward_to_inputs(const LlmParams& params, LlmTape& tape, const Matrix& grad_logits);

enum class Direction { kForward, kBackward };

// FLOPs (two per multiply-accumulate) of one pass over S positions:
//   per layer  8*S*d^2 (q, k, v, o projections) + 4*S^2*d (scores and mix)
//              + 4*S*d*F (two FFN maps, F = ffn_mult * d)
//   output     2*S*d*V
// Backward is charged at twice the forward count.
std::uint64_t llm_flops(const LlmConfig& config, std::size_t length, Direction direction);

inline constexpr const char* kLlmSection = "toyllm";

Checkpoint llm_to_checkpoint(const LlmParams& params);
LlmParams llm_from_checkpoint(const Checkpoint& ckpt);
void llm_save(const LlmParams& params, const std::filesystem::path& path);
LlmParams llm_load(const std::filesystem::path& path);

}  // namespace ualign
