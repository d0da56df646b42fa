#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ualign/corpus/language.hpp"

namespace ualign {

// Task scores of one evaluation. A metric whose task had no samples is NaN
// (null in JSON).
struct MetricsReport {
  std::array<std::size_t, 4> samples{};   // per task, kAllTasks order
  double asr_cer = 0.0;                   // corpus-level edits / reference tokens
  double ic_accuracy = 0.0;
  double ner_all = 0.0;                   // per-position tag accuracy
  double ner_per = 0.0, ner_loc = 0.0, ner_org = 0.0;
  double sr_exact = 0.0;
  double alignment_cosine = 0.0;          // mean cosine along the DTW path
  double dtw_loss = 0.0;
  std::uint64_t flops = 0;

  std::string to_json() const;
  static MetricsReport from_json(const std::string& text);
  void validate() const;
};

class MetricsAccumulator {
 public:
  // `gold` and `predicted` are task targets (decoded tokens without EOS).
  void add(Task task, std::span<const int> gold, std::span<const int> predicted);
  void add_alignment(double mean_cosine, double dtw_loss);
  MetricsReport finish() const;

 private:
  std::array<std::size_t, 4> samples_{};
  std::size_t asr_edits_ = 0, asr_ref_ = 0;
  std::size_t ic_correct_ = 0;
  std::size_t ner_correct_ = 0, ner_total_ = 0;
  std::array<std::size_t, 3> ner_class_correct_{}, ner_class_total_{};
  std::size_t sr_correct_ = 0;
  double cosine_sum_ = 0.0, dtw_sum_ = 0.0;
  std::size_t aligned_ = 0;
};

}  // namespace ualign
