#include "ualign/trainer/metrics.hpp"

#include <cmath>
#include <limits>

#include "json.hpp"
#include "ualign/numerics/error.hpp"
#include "ualign/numerics/kernels.hpp"

namespace ualign {

using json = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? kNaN : static_cast<double>(num) / static_cast<double>(den);
}

json number_or_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

double read_number(const json& j, const char* key) {
  const json& v = j.at(key);
  return v.is_null() ? kNaN : v.get<double>();
}

}  // namespace

void MetricsAccumulator::add(Task task, std::span<const int> gold, std::span<const int> predicted) {
  ++samples_[static_cast<std::size_t>(task)];
  switch (task) {
    case Task::kAsr:
      asr_edits_ += edit_distance(gold, predicted);
      asr_ref_ += gold.size();
      break;
    case Task::kIc:
      ic_correct_ += predicted.size() >= 1 && !gold.empty() && predicted[0] == gold[0];
      break;
    case Task::kNer:
      for (std::size_t i = 0; i < gold.size(); ++i) {
        const bool ok = i < predicted.size() && predicted[i] == gold[i];
        ner_correct_ += ok;
        ++ner_total_;
        const int c = vocab::tag_entity_class(gold[i]);
        if (c >= 0) {
          ner_class_correct_[static_cast<std::size_t>(c)] += ok;
          ++ner_class_total_[static_cast<std::size_t>(c)];
        }
      }
      break;
    case Task::kSr:
      sr_correct_ += std::equal(gold.begin(), gold.end(), predicted.begin(), predicted.end());
      break;
  }
}

void MetricsAccumulator::add_alignment(double mean_cosine, double dtw_loss) {
  cosine_sum_ += mean_cosine;
  dtw_sum_ += dtw_loss;
  ++aligned_;
}

MetricsReport MetricsAccumulator::finish() const {
  MetricsReport r;
  r.samples = samples_;
  r.asr_cer = samples_[0] == 0 ? kNaN : ratio(asr_edits_, asr_ref_);
  r.ic_accuracy = ratio(ic_correct_, samples_[1]);
  r.ner_all = ratio(ner_correct_, ner_total_);
  r.ner_per = ratio(ner_class_correct_[0], ner_class_total_[0]);
  r.ner_loc = ratio(ner_class_correct_[1], ner_class_total_[1]);
  r.ner_org = ratio(ner_class_correct_[2], ner_class_total_[2]);
  r.sr_exact = ratio(sr_correct_, samples_[3]);
  r.alignment_cosine = aligned_ == 0 ? kNaN : cosine_sum_ / static_cast<double>(aligned_);
  r.dtw_loss = aligned_ == 0 ? kNaN : dtw_sum_ / static_cast<double>(aligned_);
  return r;
}

std::string MetricsReport::to_json() const {
  json j;
  j["samples"] = {{"asr", samples[0]}, {"ic", samples[1]}, {"ner", samples[2]}, {"sr", samples[3]}};
  j["IC"] = number_or_null(ic_accuracy);
  j["NER-ALL"] = number_or_null(ner_all);
  j["NER-PER"] = number_or_null(ner_per);
  j["NER-LOC"] = number_or_null(ner_loc);
  j["NER-ORG"] = number_or_null(ner_org);
  j["SR"] = number_or_null(sr_exact);
  j["ASR"] = number_or_null(asr_cer);
  j["alignment_cosine"] = number_or_null(alignment_cosine);
  j["dtw_loss"] = number_or_null(dtw_loss);
  j["flops"] = flops;
  return j.dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    MetricsReport r;
    const json& s = j.at("samples");
    r.samples = {s.at("asr").get<std::size_t>(), s.at("ic").get<std::size_t>(),
                 s.at("ner").get<std::size_t>(), s.at("sr").get<std::size_t>()};
    r.ic_accuracy = read_number(j, "IC");
    r.ner_all = read_number(j, "NER-ALL");
    r.ner_per = read_number(j, "NER-PER");
    r.ner_loc = read_number(j, "NER-LOC");
    r.ner_org = read_number(j, "NER-ORG");
    r.sr_exact = read_number(j, "SR");
    r.asr_cer = read_number(j, "ASR");
    r.alignment_cosine = read_number(j, "alignment_cosine");
    r.dtw_loss = read_number(j, "dtw_loss");
    r.flops = j.at("flops").get<std::uint64_t>();
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("metrics report: ") + e.what());
  }
}

void MetricsReport::validate() const {
  auto unit = [](double v, const char* name) {
    if (!std::isnan(v) && !(v >= 0.0 && v <= 1.0)) {
      throw NumericError(std::string("metric ") + name + " outside [0, 1]: " + std::to_string(v));
    }
  };
  unit(ic_accuracy, "IC");
  unit(ner_all, "NER-ALL");
  unit(ner_per, "NER-PER");
  unit(ner_loc, "NER-LOC");
  unit(ner_org, "NER-ORG");
  unit(sr_exact, "SR");
  if (!std::isnan(asr_cer) && !(asr_cer >= 0.0)) throw NumericError("metric ASR is negative");
}

}  // namespace ualign
