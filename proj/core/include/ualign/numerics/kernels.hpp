#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ualign/numerics/matrix.hpp"

namespace ualign {

inline constexpr double kDefaultNormFloor = 1e-8;

// 1 - <h, e> / (max(|h|, eps) * max(|e|, eps)).
double cosine_distance(std::span<const double> h, std::span<const double> e,
                       double epsilon = kDefaultNormFloor);

// C(i, j) = cosine_distance(H.row(i), E.row(j)). Throws ShapeError when the
// embedding widths differ.
Matrix cosine_distance_matrix(const Matrix& h, const Matrix& e,
                              double epsilon = kDefaultNormFloor);

// Gradient of cosine_distance with respect to h. Each norm is clamped
// independently; a clamped norm is treated as constant.
std::vector<double> cosine_distance_grad(std::span<const double> h, std::span<const double> e,
                                         double epsilon = kDefaultNormFloor);

double log_sum_exp(std::span<const double> values);

// Levenshtein distance with unit costs.
template <typename Seq>
std::size_t edit_distance(const Seq& a, const Seq& b) {
  const std::size_t n = b.size();
  std::vector<std::size_t> prev(n + 1), cur(n + 1);
  for (std::size_t j = 0; j <= n; ++j) prev[j] = j;
  std::size_t i = 0;
  for (const auto& x : a) {
    ++i;
    cur[0] = i;
    std::size_t j = 0;
    for (const auto& y : b) {
      ++j;
      std::size_t best = prev[j - 1] + (x == y ? 0 : 1);
      if (prev[j] + 1 < best) best = prev[j] + 1;
      if (cur[j - 1] + 1 < best) best = cur[j - 1] + 1;
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

// Mean-centred projection onto the leading principal directions, found by
// power iteration with deflation (fixed seed, iterated until the direction
// stops moving). Each component's first nonzero loading is made positive.
// Zero-variance input projects to all zeros.
Matrix pca_project(const Matrix& points, std::size_t out_dims = 2);

// The unit principal directions used by pca_project, one per row.
Matrix pca_components(const Matrix& points, std::size_t out_dims = 2);

double gelu(double x) noexcept;
double gelu_grad(double x) noexcept;

}  // namespace ualign
