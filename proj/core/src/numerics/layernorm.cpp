#include "ualign/numerics/layernorm.hpp"

#include <algorithm>
#include <cmath>

#include "ualign/numerics/error.hpp"

namespace ualign {

Matrix layer_norm_forward(const Matrix& x, std::span<const double> gain,
                          std::span<const double> bias, LayerNormCache& cache,
                          double variance_floor) {
  const std::size_t n = x.cols();
  if (gain.size() != n || bias.size() != n) {
    throw ShapeError("layer_norm: width " + std::to_string(n) + " but gain/bias have " +
                     std::to_string(gain.size()) + "/" + std::to_string(bias.size()));
  }
  cache.normalized = Matrix(x.rows(), n);
  cache.inv_std.assign(x.rows(), 0.0);
  cache.floored.assign(x.rows(), false);
  Matrix y(x.rows(), n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row(r);
    double mean = 0.0;
    for (double v : xr) mean += v;
    mean *= inv_n;
    double var = 0.0;
    for (double v : xr) var += (v - mean) * (v - mean);
    var *= inv_n;
    const bool floored = var < variance_floor;
    const double inv_std = 1.0 / std::sqrt(floored ? variance_floor : var);
    cache.inv_std[r] = inv_std;
    cache.floored[r] = floored;
    auto nr = cache.normalized.row(r);
    auto yr = y.row(r);
    for (std::size_t k = 0; k < n; ++k) {
      nr[k] = (xr[k] - mean) * inv_std;
      yr[k] = gain[k] * nr[k] + bias[k];
    }
  }
  return y;
}

Matrix layer_norm_backward(const Matrix& grad_out, std::span<const double> gain,
                           const LayerNormCache& cache, std::span<double> grad_gain,
                           std::span<double> grad_bias) {
  const std::size_t n = grad_out.cols();
  Matrix dx(grad_out.rows(), n);
  std::vector<double> dxhat(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < grad_out.rows(); ++r) {
    auto g = grad_out.row(r);
    auto xhat = cache.normalized.row(r);
    double mean_d = 0.0, mean_dx = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      grad_gain[k] += g[k] * xhat[k];
      grad_bias[k] += g[k];
      dxhat[k] = g[k] * gain[k];
      mean_d += dxhat[k];
      mean_dx += dxhat[k] * xhat[k];
    }
    mean_d *= inv_n;
    mean_dx *= inv_n;
    if (cache.floored[r]) mean_dx = 0.0;  // scale is a constant on floored rows
    auto out = dx.row(r);
    for (std::size_t k = 0; k < n; ++k) {
      out[k] = cache.inv_std[r] * (dxhat[k] - mean_d - xhat[k] * mean_dx);
    }
  }
  return dx;
}

}  // namespace ualign
