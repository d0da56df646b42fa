#include "ualign/oracle/finite_difference.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "ualign/numerics/error.hpp"

namespace ualign::oracle {

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << label << ": " << checked << " entries, max rel err " << max_rel_error;
  if (checked > 0) {
    os << " (index " << worst_index << ": analytic " << worst_analytic << ", numeric "
       << worst_numeric << ")";
  }
  return os.str();
}

void GradCheckReport::merge(const GradCheckReport& other) {
  checked += other.checked;
  if (other.max_rel_error > max_rel_error) {
    max_rel_error = other.max_rel_error;
    worst_index = other.worst_index;
    worst_analytic = other.worst_analytic;
    worst_numeric = other.worst_numeric;
  }
}

double relative_error(double analytic, double numeric, double scale_floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), scale_floor, 1e-12});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport check_gradient(const std::string& label, std::span<double> values,
                               std::span<const double> analytic,
                               const std::function<double()>& loss, double step) {
  if (values.size() != analytic.size()) {
    throw ShapeError("check_gradient(" + label + "): " + std::to_string(values.size()) +
                     " values but " + std::to_string(analytic.size()) + " gradient entries");
  }
  std::vector<double> numeric(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + step;
    const double up = loss();
    values[i] = saved - step;
    const double down = loss();
    values[i] = saved;
    numeric[i] = (up - down) / (2.0 * step);
  }
  double scale = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  }
  GradCheckReport r;
  r.label = label;
  r.checked = values.size();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double e = relative_error(analytic[i], numeric[i], 1e-3 * scale);
    if (e > r.max_rel_error || i == 0) {
      r.max_rel_error = std::max(r.max_rel_error, e);
      r.worst_index = i;
      r.worst_analytic = analytic[i];
      r.worst_numeric = numeric[i];
    }
  }
  return r;
}

}  // namespace ualign::oracle
