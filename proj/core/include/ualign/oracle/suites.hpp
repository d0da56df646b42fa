#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ualign::oracle {

struct SuiteReport {
  std::string name;
  std::size_t trials = 0;
  std::size_t failures = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::vector<std::string> notes;   // first few mismatches

  bool passed() const { return trials > 0 && failures == 0; }
  std::string summary() const;
};

// Dynamic program against path enumeration on random I, J <= 6 grids, a
// fifth of them with integer costs so ties exercise the tie-break. Loss and
// path must match exactly.
SuiteReport dtw_suite(std::size_t trials = 500, std::uint64_t seed = 1);

// Forward algorithm against enumeration of every frame string, on feasible
// instances with T <= 6 and vocab <= 4; absolute tolerance 1e-9.
SuiteReport ctc_suite(std::size_t trials = 200, std::uint64_t seed = 2);

// Central finite differences: cosine distance and DTW (1e-5), the CTC head
// (1e-5), DTW through the adapter and cross entropy through the LLM and
// adapter (1e-4).
std::vector<SuiteReport> grad_suites(std::uint64_t seed = 3);

}  // namespace ualign::oracle
