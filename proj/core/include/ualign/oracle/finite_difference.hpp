#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

namespace ualign::oracle {

struct GradCheckReport {
  std::string label;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  bool passed(double tolerance) const { return max_rel_error <= tolerance; }
  std::string summary() const;
  void merge(const GradCheckReport& other);
};

// Per-entry relative error. The denominator is floored at `scale_floor`
// so entries far below the gradient's overall magnitude are judged against
// that floor instead of their own round-off.
double relative_error(double analytic, double numeric, double scale_floor);

// Central differences of `loss` with respect to every entry of `values`
// (perturbed in place and restored), compared against `analytic`. The
// scale floor is 1e-3 of the largest gradient magnitude in the block.
GradCheckReport check_gradient(const std::string& label, std::span<double> values,
                               std::span<const double> analytic,
                               const std::function<double()>& loss, double step = 1e-6);

}  // namespace ualign::oracle
