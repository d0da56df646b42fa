#pragma once

// Test-only reference implementations. They deliberately take the slow,
// obvious route so they share no code path with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ualign/numerics/matrix.hpp"

namespace ualign::testing {

// Exhaustive recursion over edit operations (exponential; short inputs only).
inline std::size_t edit_distance_recursive(const std::string& a, const std::string& b) {
  if (a.empty()) return b.size();
  if (b.empty()) return a.size();
  const std::string ra = a.substr(1), rb = b.substr(1);
  std::size_t best = edit_distance_recursive(ra, rb) + (a[0] == b[0] ? 0 : 1);
  best = std::min(best, edit_distance_recursive(ra, b) + 1);
  best = std::min(best, edit_distance_recursive(a, rb) + 1);
  return best;
}

// Cyclic Jacobi eigenvalue iteration for a symmetric matrix.
inline std::vector<double> jacobi_eigenvalues(Matrix a, int sweeps = 100) {
  const std::size_t n = a.rows();
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

// All monotonic paths of a rows x cols grid as lists of cells.
inline void enumerate_paths(std::size_t rows, std::size_t cols,
                            const std::function<void(const std::vector<std::pair<std::size_t, std::size_t>>&)>& visit) {
  std::vector<std::pair<std::size_t, std::size_t>> path{{0, 0}};
  std::function<void()> go = [&] {
    auto [i, j] = path.back();
    if (i == rows - 1 && j == cols - 1) {
      visit(path);
      return;
    }
    const std::pair<std::size_t, std::size_t> moves[3] = {{1, 1}, {1, 0}, {0, 1}};
    for (auto [di, dj] : moves) {
      if (i + di < rows && j + dj < cols) {
        path.emplace_back(i + di, j + dj);
        go();
        path.pop_back();
      }
    }
  };
  go();
}

}  // namespace ualign::testing
