#include "ualign/losses/ctc.hpp"

#include <cmath>
#include <limits>

#include "ualign/losses/cross_entropy.hpp"
#include "ualign/numerics/error.hpp"
#include "ualign/numerics/kernels.hpp"

namespace ualign {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

std::vector<int> extend_with_blanks(std::span<const int> labels, int blank) {
  std::vector<int> ext(2 * labels.size() + 1, blank);
  for (std::size_t k = 0; k < labels.size(); ++k) ext[2 * k + 1] = labels[k];
  return ext;
}

void check_labels(const CtcSetup& setup, std::span<const int> labels, const char* op) {
  setup.validate();
  for (int l : labels) {
    if (l == setup.blank_id) {
      throw InvalidArgument(std::string(op) + ": labels contain the blank id " +
                            std::to_string(l));
    }
    if (l < 0 || static_cast<std::size_t>(l) >= setup.vocab_size) {
      throw InvalidArgument(std::string(op) + ": label " + std::to_string(l) +
                            " outside vocabulary of " + std::to_string(setup.vocab_size));
    }
  }
  const std::size_t need = ctc_min_frames(labels);
  if (setup.frames() < need) {
    throw InvalidArgument(std::string(op) + ": " + std::to_string(labels.size()) +
                          " labels need at least T = " + std::to_string(need) +
                          " frames, got T = " + std::to_string(setup.frames()));
  }
}

bool can_skip(const std::vector<int>& ext, std::size_t s, int blank) {
  return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];
}

Matrix compute_alpha(const CtcSetup& setup, const std::vector<int>& ext) {
  const std::size_t frames = setup.frames(), states = ext.size();
  const Matrix& lp = setup.log_probs;
  Matrix alpha(frames, states, kNegInf);
  alpha(0, 0) = lp(0, ext[0]);
  if (states > 1) alpha(0, 1) = lp(0, ext[1]);
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      double a = alpha(t - 1, s);
      if (s >= 1) a = log_add(a, alpha(t - 1, s - 1));
      if (can_skip(ext, s, setup.blank_id)) a = log_add(a, alpha(t - 1, s - 2));
      alpha(t, s) = a == kNegInf ? kNegInf : a + lp(t, ext[s]);
    }
  }
  return alpha;
}

Matrix compute_beta(const CtcSetup& setup, const std::vector<int>& ext) {
  const std::size_t frames = setup.frames(), states = ext.size();
  const Matrix& lp = setup.log_probs;
  Matrix beta(frames, states, kNegInf);
  beta(frames - 1, states - 1) = lp(frames - 1, ext[states - 1]);
  if (states > 1) beta(frames - 1, states - 2) = lp(frames - 1, ext[states - 2]);
  for (std::size_t t = frames - 1; t-- > 0;) {
    for (std::size_t s = 0; s < states; ++s) {
      double b = beta(t + 1, s);
      if (s + 1 < states) b = log_add(b, beta(t + 1, s + 1));
      if (s + 2 < states && can_skip(ext, s + 2, setup.blank_id)) b = log_add(b, beta(t + 1, s + 2));
      beta(t, s) = b == kNegInf ? kNegInf : b + lp(t, ext[s]);
    }
  }
  return beta;
}

double final_log_prob(const Matrix& alpha) {
  const std::size_t t = alpha.rows() - 1, s = alpha.cols() - 1;
  return s >= 1 ? log_add(alpha(t, s), alpha(t, s - 1)) : alpha(t, s);
}

}  // namespace

CtcSetup CtcSetup::from_logits(const Matrix& logits, int blank_id) {
  CtcSetup setup;
  setup.vocab_size = logits.cols();
  setup.blank_id = blank_id;
  setup.log_probs = log_softmax_rows(logits);
  setup.validate();
  return setup;
}

void CtcSetup::validate() const {
  if (log_probs.cols() != vocab_size) {
    throw ShapeError("CtcSetup: log_probs is " + log_probs.shape_string() + " but vocab_size is " +
                     std::to_string(vocab_size));
  }
  if (blank_id < 0 || static_cast<std::size_t>(blank_id) >= vocab_size) {
    throw InvalidArgument("CtcSetup: blank id " + std::to_string(blank_id) +
                          " outside vocabulary of " + std::to_string(vocab_size));
  }
  if (log_probs.rows() == 0) throw InvalidArgument("CtcSetup: no frames");
  for (std::size_t t = 0; t < log_probs.rows(); ++t) {
    const double z = log_sum_exp(log_probs.row(t));
    if (!(std::abs(z) <= 1e-9)) {
      throw InvalidArgument("CtcSetup: row " + std::to_string(t) +
                            " is not log-normalised (logsumexp = " + std::to_string(z) + ")");
    }
  }
}

std::size_t ctc_min_frames(std::span<const int> labels) {
  std::size_t need = labels.size();
  for (std::size_t k = 1; k < labels.size(); ++k)
    if (labels[k] == labels[k - 1]) ++need;
  return need;
}

CtcForwardResult ctc_forward(const CtcSetup& setup, std::span<const int> labels) {
  check_labels(setup, labels, "ctc_forward");
  const auto ext = extend_with_blanks(labels, setup.blank_id);
  CtcForwardResult r;
  r.log_alpha = compute_alpha(setup, ext);
  r.loss = -final_log_prob(r.log_alpha);
  return r;
}

double ctc_bruteforce(const CtcSetup& setup, std::span<const int> labels,
                      std::uint64_t max_strings) {
  check_labels(setup, labels, "ctc_bruteforce");
  const std::size_t frames = setup.frames(), vocab = setup.vocab_size;
  double total = 1.0;
  for (std::size_t t = 0; t < frames; ++t) {
    total *= static_cast<double>(vocab);
    if (total > static_cast<double>(max_strings)) {
      throw InvalidArgument("ctc_bruteforce: vocab^T exceeds the guard of " +
                            std::to_string(max_strings) + " strings");
    }
  }
  std::vector<int> str(frames, 0);
  std::vector<int> collapsed;
  double log_total = kNegInf;
  for (;;) {
    collapsed.clear();
    int prev = -1;
    for (int c : str) {
      if (c != prev && c != setup.blank_id) collapsed.push_back(c);
      prev = c;
    }
    if (std::equal(collapsed.begin(), collapsed.end(), labels.begin(), labels.end())) {
      double lp = 0.0;
      for (std::size_t t = 0; t < frames; ++t) lp += setup.log_probs(t, str[t]);
      log_total = log_add(log_total, lp);
    }
    std::size_t pos = 0;
    while (pos < frames && ++str[pos] == static_cast<int>(vocab)) str[pos++] = 0;
    if (pos == frames) break;
  }
  return -log_total;
}

Matrix ctc_backward(const CtcSetup& setup, std::span<const int> labels) {
  check_labels(setup, labels, "ctc_backward");
  const auto ext = extend_with_blanks(labels, setup.blank_id);
  const Matrix alpha = compute_alpha(setup, ext);
  const Matrix beta = compute_beta(setup, ext);
  const double log_p = final_log_prob(alpha);
  const Matrix& lp = setup.log_probs;
  Matrix grad(setup.frames(), setup.vocab_size);
  std::vector<double> occupancy(setup.vocab_size);
  for (std::size_t t = 0; t < setup.frames(); ++t) {
    std::fill(occupancy.begin(), occupancy.end(), kNegInf);
    for (std::size_t s = 0; s < ext.size(); ++s) {
      const double v = alpha(t, s) + beta(t, s) - lp(t, ext[s]);
      occupancy[ext[s]] = log_add(occupancy[ext[s]], v);
    }
    for (std::size_t k = 0; k < setup.vocab_size; ++k) {
      const double posterior = occupancy[k] == kNegInf ? 0.0 : std::exp(occupancy[k] - log_p);
      grad(t, k) = std::exp(lp(t, k)) - posterior;
    }
  }
  return grad;
}

}  // namespace ualign
