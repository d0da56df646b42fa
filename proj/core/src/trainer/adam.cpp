#include "ualign/trainer/adam.hpp"

#include <cmath>

#include "ualign/numerics/error.hpp"

namespace ualign {

void AdamConfig::validate() const {
  if (!(lr > 0.0)) throw InvalidArgument("lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidArgument("adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw InvalidArgument("adam eps must be > 0");
}

AdamState adam_init(std::span<const Tensor> params) {
  AdamState s;
  for (const Tensor& t : params) {
    s.m.emplace_back(t.numel(), 0.0);
    s.v.emplace_back(t.numel(), 0.0);
  }
  return s;
}

double adam_step(std::span<Tensor> params, AdamState& state, const AdamConfig& config) {
  if (state.m.size() != params.size()) {
    throw ShapeError("adam_step: state tracks " + std::to_string(state.m.size()) +
                     " tensors, got " + std::to_string(params.size()));
  }
  double sq = 0.0;
  for (const Tensor& t : params) {
    for (double g : t.grad) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in tensor '" + t.name + "'");
      sq += g * g;
    }
  }
  const double norm = std::sqrt(sq);
  const double scale = config.clip_norm > 0.0 && norm > config.clip_norm ? config.clip_norm / norm : 1.0;

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k];
    if (state.m[k].size() != p.numel()) {
      throw ShapeError("adam_step: state for '" + p.name + "' has the wrong size");
    }
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double g = p.grad[i] * scale;
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
      p.value[i] -= config.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config.eps);
    }
  }
  return norm;
}

}  // namespace ualign
