#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ualign/numerics/tensor.hpp"

namespace ualign {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;   // global gradient norm; <= 0 disables clipping

  void validate() const;
};

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::uint64_t step = 0;
};

AdamState adam_init(std::span<const Tensor> params);

// Clips the gradients of `params` to the global norm, then applies one
// bias-corrected Adam update. Returns the gradient norm before clipping.
// Throws NumericError naming the first tensor holding a non-finite grad.
double adam_step(std::span<Tensor> params, AdamState& state, const AdamConfig& config);

}  // namespace ualign
