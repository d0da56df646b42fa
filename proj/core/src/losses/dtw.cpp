#include "ualign/losses/dtw.hpp"

#include <algorithm>
#include <limits>

#include "ualign/numerics/error.hpp"

namespace ualign {

bool WarpingPath::is_valid(std::size_t rows, std::size_t cols) const {
  if (steps.empty() || rows == 0 || cols == 0) return false;
  if (steps.front() != std::pair<std::size_t, std::size_t>{0, 0}) return false;
  if (steps.back() != std::pair<std::size_t, std::size_t>{rows - 1, cols - 1}) return false;
  for (std::size_t k = 1; k < steps.size(); ++k) {
    const auto [pi, pj] = steps[k - 1];
    const auto [i, j] = steps[k];
    const std::size_t di = i - pi;
    const std::size_t dj = j - pj;
    if (i < pi || j < pj || di > 1 || dj > 1 || (di == 0 && dj == 0)) return false;
  }
  return true;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_cost(const Matrix& cost, const char* op) {
  if (cost.rows() == 0 || cost.cols() == 0) {
    throw InvalidArgument(std::string(op) + ": cost matrix is empty (" + cost.shape_string() +
                          ")");
  }
  if (!cost.all_finite()) throw NumericError(std::string(op) + ": cost matrix is not finite");
}

Matrix accumulate(const Matrix& cost) {
  const std::size_t rows = cost.rows(), cols = cost.cols();
  Matrix acc(rows, cols, kInf);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (i == 0 && j == 0) {
        acc(i, j) = cost(i, j);
        continue;
      }
      double best = kInf;
      if (i > 0 && j > 0) best = acc(i - 1, j - 1);
      if (i > 0) best = std::min(best, acc(i - 1, j));
      if (j > 0) best = std::min(best, acc(i, j - 1));
      acc(i, j) = cost(i, j) + best;
    }
  }
  return acc;
}

// Predecessors of (i, j) in tie-break preference order.
struct Predecessors {
  std::pair<std::size_t, std::size_t> cell[3];
  int count = 0;
};

Predecessors predecessors(std::size_t i, std::size_t j) {
  Predecessors p;
  if (i > 0 && j > 0) p.cell[p.count++] = {i - 1, j - 1};
  if (i > 0) p.cell[p.count++] = {i - 1, j};
  if (j > 0) p.cell[p.count++] = {i, j - 1};
  return p;
}

DtwResult finish(const Matrix& cost, WarpingPath path, double path_sum) {
  DtwResult r;
  r.path = std::move(path);
  r.path_sum = path_sum;
  const double inv_len = 1.0 / static_cast<double>(r.path.length());
  r.loss = path_sum * inv_len;
  r.cost_grad = Matrix(cost.rows(), cost.cols());
  for (const auto& [i, j] : r.path.steps) r.cost_grad(i, j) = inv_len;
  return r;
}

}  // namespace

DtwResult dtw_forward(const Matrix& cost) {
  check_cost(cost, "dtw_forward");
  const Matrix acc = accumulate(cost);
  WarpingPath path;
  std::size_t i = cost.rows() - 1, j = cost.cols() - 1;
  path.steps.emplace_back(i, j);
  while (i > 0 || j > 0) {
    const Predecessors p = predecessors(i, j);
    auto best = p.cell[0];
    for (int k = 1; k < p.count; ++k) {
      if (acc(p.cell[k].first, p.cell[k].second) < acc(best.first, best.second)) best = p.cell[k];
    }
    std::tie(i, j) = best;
    path.steps.emplace_back(i, j);
  }
  std::reverse(path.steps.begin(), path.steps.end());
  return finish(cost, std::move(path), acc(cost.rows() - 1, cost.cols() - 1));
}

std::uint64_t count_warping_paths(std::size_t rows, std::size_t cols) {
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  std::vector<std::uint64_t> prev(cols, 1), cur(cols);
  auto sat_add = [](std::uint64_t a, std::uint64_t b) { return a > kMax - b ? kMax : a + b; };
  for (std::size_t i = 1; i < rows; ++i) {
    cur[0] = 1;
    for (std::size_t j = 1; j < cols; ++j) {
      cur[j] = sat_add(sat_add(prev[j - 1], prev[j]), cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return cols == 0 ? 0 : prev[cols - 1];
}

namespace {

struct Enumerator {
  const Matrix& cost;
  std::vector<std::pair<std::size_t, std::size_t>> reversed;
  WarpingPath best;
  double best_sum = kInf;

  void visit(std::size_t i, std::size_t j) {
    reversed.emplace_back(i, j);
    if (i == 0 && j == 0) {
      // Sum front to back so rounding matches the dynamic program.
      double s = 0.0;
      bool first = true;
      for (auto it = reversed.rbegin(); it != reversed.rend(); ++it) {
        s = first ? cost(it->first, it->second) : s + cost(it->first, it->second);
        first = false;
      }
      if (s < best_sum) {
        best_sum = s;
        best.steps.assign(reversed.rbegin(), reversed.rend());
      }
    } else {
      const Predecessors p = predecessors(i, j);
      for (int k = 0; k < p.count; ++k) visit(p.cell[k].first, p.cell[k].second);
    }
    reversed.pop_back();
  }
};

}  // namespace

DtwResult dtw_bruteforce(const Matrix& cost, std::uint64_t max_paths) {
  check_cost(cost, "dtw_bruteforce");
  const std::uint64_t n = count_warping_paths(cost.rows(), cost.cols());
  if (n > max_paths) {
    throw InvalidArgument("dtw_bruteforce: " + cost.shape_string() + " grid has " +
                          std::to_string(n) + " paths, above the guard of " +
                          std::to_string(max_paths));
  }
  Enumerator e{cost, {}, {}, kInf};
  e.visit(cost.rows() - 1, cost.cols() - 1);
  return finish(cost, std::move(e.best), e.best_sum);
}

Matrix dtw_backward(const DtwResult& result, const Matrix& h, const Matrix& e, double epsilon) {
  if (result.cost_grad.rows() != h.rows() || result.cost_grad.cols() != e.rows() ||
      h.cols() != e.cols()) {
    throw ShapeError("dtw_backward: result covers " + result.cost_grad.shape_string() +
                     " but H is " + h.shape_string() + " and E is " + e.shape_string());
  }
  Matrix grad(h.rows(), h.cols());
  const double inv_len = 1.0 / static_cast<double>(result.path.length());
  for (const auto& [i, j] : result.path.steps) {
    const auto g = cosine_distance_grad(h.row(i), e.row(j), epsilon);
    auto out = grad.row(i);
    for (std::size_t k = 0; k < g.size(); ++k) out[k] += inv_len * g[k];
  }
  return grad;
}

double dtw_path_margin(const Matrix& cost) {
  check_cost(cost, "dtw_path_margin");
  const Matrix acc = accumulate(cost);
  const DtwResult r = dtw_forward(cost);
  double margin = kInf;
  for (std::size_t k = 1; k < r.path.steps.size(); ++k) {
    const auto [i, j] = r.path.steps[k];
    const auto chosen = r.path.steps[k - 1];
    const Predecessors p = predecessors(i, j);
    for (int q = 0; q < p.count; ++q) {
      if (p.cell[q] == chosen) continue;
      margin = std::min(margin, acc(p.cell[q].first, p.cell[q].second) -
                                    acc(chosen.first, chosen.second));
    }
  }
  return margin;
}

}  // namespace ualign
