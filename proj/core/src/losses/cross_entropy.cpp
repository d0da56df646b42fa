#include "ualign/losses/cross_entropy.hpp"

#include <cmath>

#include "ualign/numerics/error.hpp"
#include "ualign/numerics/kernels.hpp"

namespace ualign {

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const double z = log_sum_exp(logits.row(r));
    auto in = logits.row(r);
    auto o = out.row(r);
    for (std::size_t k = 0; k < in.size(); ++k) o[k] = in[k] - z;
  }
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out = log_softmax_rows(logits);
  for (double& v : out.values()) v = std::exp(v);
  return out;
}

CrossEntropyResult cross_entropy(const Matrix& logits, std::span<const int> targets,
                                 int ignore_id) {
  if (targets.size() != logits.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                     logits.shape_string());
  }
  CrossEntropyResult r;
  r.grad = Matrix(logits.rows(), logits.cols());
  for (int t : targets) {
    if (t == ignore_id) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= logits.cols()) {
      throw InvalidArgument("cross_entropy: target " + std::to_string(t) +
                            " outside vocabulary of " + std::to_string(logits.cols()));
    }
    ++r.counted;
  }
  if (r.counted == 0) throw InvalidArgument("cross_entropy: every position is ignored");
  const double inv = 1.0 / static_cast<double>(r.counted);
  for (std::size_t p = 0; p < logits.rows(); ++p) {
    if (targets[p] == ignore_id) continue;
    const double z = log_sum_exp(logits.row(p));
    r.loss += (z - logits(p, targets[p])) * inv;
    auto g = r.grad.row(p);
    auto in = logits.row(p);
    for (std::size_t k = 0; k < in.size(); ++k) g[k] = std::exp(in[k] - z) * inv;
    g[targets[p]] -= inv;
  }
  return r;
}

}  // namespace ualign
