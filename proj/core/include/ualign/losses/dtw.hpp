#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "ualign/numerics/kernels.hpp"
#include "ualign/numerics/matrix.hpp"

namespace ualign {

// Monotonic warping path over an I x J cost matrix. Steps are 0-based
// (row, col) pairs running from (0, 0) to (I-1, J-1); consecutive steps
// differ by (1,0), (0,1) or (1,1).
struct WarpingPath {
  std::vector<std::pair<std::size_t, std::size_t>> steps;

  std::size_t length() const noexcept { return steps.size(); }
  bool is_valid(std::size_t rows, std::size_t cols) const;
  friend bool operator==(const WarpingPath&, const WarpingPath&) = default;
};

struct DtwResult {
  double loss = 0.0;      // path_sum / |path|
  WarpingPath path;
  double path_sum = 0.0;
  Matrix cost_grad;       // dloss/dC: 1/|path| on the path, zero elsewhere
};

// Minimum-sum monotonic path by dynamic programming, normalised by the
// length of that path. Ties in accumulated cost prefer the diagonal
// predecessor, then the vertical one (i-1, j), then the horizontal one.
DtwResult dtw_forward(const Matrix& cost);

// Number of monotonic paths through an rows x cols grid (Delannoy number),
// saturating at UINT64_MAX.
std::uint64_t count_warping_paths(std::size_t rows, std::size_t cols);

// Exhaustive enumeration of every monotonic path; same result and tie-break
// as dtw_forward. Refuses grids with more than max_paths paths.
DtwResult dtw_bruteforce(const Matrix& cost, std::uint64_t max_paths = 1'000'000);

// dloss/dH for cost = cosine_distance_matrix(H, E), with the optimal path and
// its length held fixed.
Matrix dtw_backward(const DtwResult& result, const Matrix& h, const Matrix& e,
                    double epsilon = kDefaultNormFloor);

// Smallest gap, over cells on the optimal path, between the chosen
// predecessor's accumulated cost and the best rejected one. Perturbations
// smaller than this leave the path unchanged.
double dtw_path_margin(const Matrix& cost);

}  // namespace ualign
