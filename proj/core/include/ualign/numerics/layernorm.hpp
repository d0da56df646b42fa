#pragma once

#include <span>
#include <vector>

#include "ualign/numerics/matrix.hpp"

namespace ualign {

inline constexpr double kLayerNormVarianceFloor = 1e-5;

// Per-row normalisation statistics kept for the backward pass.
struct LayerNormCache {
  Matrix normalized;               // (x - mean) * inv_std, before gain/bias
  std::vector<double> inv_std;     // 1 / sqrt(max(var, floor))
  std::vector<bool> floored;       // var fell below the floor
};

// y = gain * (x - mean) / sqrt(max(var, floor)) + bias, row by row, with the
// population variance. Rows whose variance is below the floor normalise
// by the floor instead, so constant rows map to zero.
Matrix layer_norm_forward(const Matrix& x, std::span<const double> gain,
                          std::span<const double> bias, LayerNormCache& cache,
                          double variance_floor = kLayerNormVarianceFloor);

// Returns dL/dx; accumulates dL/dgain and dL/dbias into the given buffers.
Matrix layer_norm_backward(const Matrix& grad_out, std::span<const double> gain,
                           const LayerNormCache& cache, std::span<double> grad_gain,
                           std::span<double> grad_bias);

}  // namespace ualign
