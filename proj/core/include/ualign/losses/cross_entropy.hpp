#pragma once

#include <span>

#include "ualign/numerics/matrix.hpp"

namespace ualign {

struct CrossEntropyResult {
  double loss = 0.0;
  Matrix grad;       // dloss/dlogits
  std::size_t counted = 0;
};

// Mean negative log-softmax of targets over positions whose target is not
// ignore_id. Throws when every position is ignored.
CrossEntropyResult cross_entropy(const Matrix& logits, std::span<const int> targets,
                                 int ignore_id);

// Row-wise softmax and log-softmax helpers shared by the heads.
Matrix softmax_rows(const Matrix& logits);
Matrix log_softmax_rows(const Matrix& logits);

}  // namespace ualign
