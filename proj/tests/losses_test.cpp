#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "doctest.h"
#include "support/oracles.hpp"
#include "ualign/losses/cross_entropy.hpp"
#include "ualign/losses/ctc.hpp"
#include "ualign/losses/dtw.hpp"
#include "ualign/numerics/error.hpp"
#include "ualign/numerics/kernels.hpp"
#include "ualign/numerics/rng.hpp"
#include "ualign/oracle/finite_difference.hpp"

using namespace ualign;

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

Matrix uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform();
  return m;
}

}  // namespace

TEST_CASE("dtw forward small cases") {
  auto single = dtw_forward(Matrix::from_rows({{0.7}}));
  CHECK(single.loss == 0.7);
  CHECK(single.path.length() == 1);

  CHECK(dtw_forward(Matrix(2, 3)).loss == 0.0);

  auto r = dtw_forward(Matrix::from_rows({{0.2, 0.9}, {0.8, 0.1}}));
  CHECK(r.path_sum == doctest::Approx(0.3));
  CHECK(r.path.length() == 2);
  CHECK(r.loss == doctest::Approx(0.15));

  auto diag = dtw_bruteforce(Matrix::from_rows({{0, 1}, {1, 0}}));
  CHECK(diag.loss == 0.0);
  CHECK(diag.path.steps == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 1}});

  auto row = dtw_bruteforce(Matrix::from_rows({{1, 2, 3, 4, 5}}));
  CHECK(row.loss == doctest::Approx(3.0));
  CHECK(count_warping_paths(1, 5) == 1);

  CHECK_THROWS_AS(dtw_forward(Matrix(0, 3)), InvalidArgument);
}

TEST_CASE("dtw hand enumeration of the 2x2 grid") {
  const Matrix c = Matrix::from_rows({{0.2, 0.9}, {0.8, 0.1}});
  std::vector<double> means;
  testing::enumerate_paths(2, 2, [&](const auto& path) {
    double s = 0;
    for (auto [i, j] : path) s += c(i, j);
    means.push_back(s / static_cast<double>(path.size()));
  });
  CHECK(means.size() == 3);
  CHECK(count_warping_paths(2, 2) == 3);
  CHECK(*std::min_element(means.begin(), means.end()) == doctest::Approx(0.15));
}

TEST_CASE("dtw dynamic program equals brute force exactly") {
  Rng rng(500);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rows = 1 + rng.below(4), cols = 1 + rng.below(4);
    const Matrix c = uniform_matrix(rng, rows, cols);
    const auto dp = dtw_forward(c);
    const auto bf = dtw_bruteforce(c);
    CHECK(dp.loss == bf.loss);
    CHECK(dp.path == bf.path);
    CHECK(dp.path.is_valid(rows, cols));
  }
}

TEST_CASE("dtw tie-break prefers diagonal, then vertical") {
  // Every path has sum zero; the shortest lexicographic preference wins.
  const auto r = dtw_forward(Matrix(3, 2));
  CHECK(r.path.steps == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 0}, {2, 1}});
  CHECK(dtw_bruteforce(Matrix(3, 2)).path == r.path);
}

TEST_CASE("dtw brute force guard") {
  CHECK(count_warping_paths(3, 3) == 13);
  CHECK(count_warping_paths(4, 4) == 63);
  CHECK_THROWS_AS(dtw_bruteforce(Matrix(12, 12)), InvalidArgument);
}

TEST_CASE("dtw loss bounds and path validity") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t rows = 1 + rng.below(8), cols = 1 + rng.below(8);
    const Matrix h = random_matrix(rng, rows, 5), e = random_matrix(rng, cols, 5);
    const Matrix c = cosine_distance_matrix(h, e);
    const auto r = dtw_forward(c);
    CHECK(r.loss >= 0.0);
    CHECK(r.loss <= 2.0);
    CHECK(r.path.is_valid(rows, cols));
    CHECK(r.path.length() >= std::max(rows, cols));
    CHECK(r.path.length() <= rows + cols - 1);
  }
}

TEST_CASE("dtw backward is zero when every row matches its aligned target") {
  const Matrix e = Matrix::from_rows({{1, 0, 0}, {0, 1, 0}});
  const Matrix h = Matrix::from_rows({{2, 0, 0}, {0, 3, 0}});
  const auto r = dtw_forward(cosine_distance_matrix(h, e));
  const Matrix g = dtw_backward(r, h, e);
  for (double v : g.values()) CHECK(v == doctest::Approx(0.0));
  CHECK_THROWS_AS(dtw_backward(r, Matrix(3, 3), e), ShapeError);
}

TEST_CASE("dtw backward matches finite differences away from ties") {
  Rng rng(41);
  int accepted = 0;
  for (int attempt = 0; attempt < 20 && accepted < 5; ++attempt) {
    Matrix h = random_matrix(rng, 4, 8);
    const Matrix e = random_matrix(rng, 3, 8);
    if (dtw_path_margin(cosine_distance_matrix(h, e)) < 1e-4) continue;
    ++accepted;
    const auto r = dtw_forward(cosine_distance_matrix(h, e));
    const Matrix g = dtw_backward(r, h, e);
    const auto report = oracle::check_gradient(
        "H", h.values(), g.values(), [&] { return dtw_forward(cosine_distance_matrix(h, e)).loss; });
    CHECK(report.max_rel_error < 1e-5);
  }
  CHECK(accepted == 5);
}

TEST_CASE("dtw backward scales inversely with row norm") {
  Rng rng(6);
  const Matrix h = random_matrix(rng, 3, 6), e = random_matrix(rng, 3, 6);
  Matrix h2 = h;
  for (double& v : h2.row(1)) v *= 2.0;
  const auto r = dtw_forward(cosine_distance_matrix(h, e));
  const Matrix g1 = dtw_backward(r, h, e), g2 = dtw_backward(r, h2, e);
  for (std::size_t k = 0; k < 6; ++k) CHECK(g2(1, k) == doctest::Approx(0.5 * g1(1, k)));
  for (std::size_t k = 0; k < 6; ++k) CHECK(g2(0, k) == doctest::Approx(g1(0, k)));
}

TEST_CASE("ctc forward examples") {
  const double third = std::log(1.0 / 3.0);
  SUBCASE("single frame") {
    CtcSetup s{3, 0, Matrix::from_rows({{std::log(0.2), std::log(0.5), std::log(0.3)}})};
    const std::vector<int> labels{1};
    CHECK(ctc_forward(s, labels).loss == doctest::Approx(-std::log(0.5)));
  }
  SUBCASE("two uniform frames") {
    CtcSetup s{3, 0, Matrix(2, 3, third)};
    const std::vector<int> labels{1};
    CHECK(ctc_forward(s, labels).loss == doctest::Approx(-std::log(1.0 / 3.0)));
    CHECK(std::exp(-ctc_bruteforce(s, labels)) == doctest::Approx(3.0 / 9.0));
  }
  SUBCASE("repeated labels against brute force") {
    Rng rng(13);
    const CtcSetup s = CtcSetup::from_logits(random_matrix(rng, 4, 3), 0);
    const std::vector<int> labels{1, 1};
    CHECK(std::abs(ctc_forward(s, labels).loss - ctc_bruteforce(s, labels)) < 1e-9);
  }
  SUBCASE("three frames one symbol") {
    Rng rng(14);
    const CtcSetup s = CtcSetup::from_logits(random_matrix(rng, 3, 2), 0);
    const std::vector<int> labels{1};
    // Strings of length 3 over {blank, a} collapsing to [a]: every string
    // except the all-blank one and "a blank a".
    double mass = 0.0;
    for (int code = 0; code < 8; ++code) {
      const int x[3] = {code & 1, (code >> 1) & 1, (code >> 2) & 1};
      const bool all_blank = code == 0;
      const bool split = x[0] == 1 && x[1] == 0 && x[2] == 1;
      if (all_blank || split) continue;
      double lp = 0.0;
      for (int t = 0; t < 3; ++t) lp += s.log_probs(t, x[t]);
      mass += std::exp(lp);
    }
    CHECK(ctc_forward(s, labels).loss == doctest::Approx(-std::log(mass)).epsilon(1e-12));
    CHECK(ctc_bruteforce(s, labels) == doctest::Approx(-std::log(mass)).epsilon(1e-12));
  }
  SUBCASE("unique alignment") {
    Rng rng(15);
    const CtcSetup s = CtcSetup::from_logits(random_matrix(rng, 2, 4), 0);
    const std::vector<int> labels{1, 2};
    CHECK(ctc_forward(s, labels).loss ==
          doctest::Approx(-(s.log_probs(0, 1) + s.log_probs(1, 2))));
  }
}

TEST_CASE("ctc rejects labels too long for the input") {
  CtcSetup s{3, 0, Matrix(2, 3, std::log(1.0 / 3.0))};
  const std::vector<int> labels{1, 1};
  CHECK(ctc_min_frames(labels) == 3);
  try {
    ctc_forward(s, labels);
    FAIL("expected error");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("T = 3") != std::string::npos);
  }
  CHECK_THROWS_AS(ctc_bruteforce(s, labels), InvalidArgument);
}

TEST_CASE("ctc forward equals brute force on random small problems") {
  Rng rng(200);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t vocab = 2 + rng.below(3);
    const std::size_t frames = 1 + rng.below(6);
    std::vector<int> labels(rng.below(4));
    for (int& l : labels) l = 1 + static_cast<int>(rng.below(vocab - 1));
    if (ctc_min_frames(labels) > frames || labels.empty()) continue;
    const CtcSetup s = CtcSetup::from_logits(random_matrix(rng, frames, vocab), 0);
    CHECK(std::abs(ctc_forward(s, labels).loss - ctc_bruteforce(s, labels)) < 1e-9);
  }
}

TEST_CASE("ctc backward") {
  SUBCASE("unique alignment reduces to cross entropy") {
    Rng rng(16);
    const Matrix logits = random_matrix(rng, 2, 4);
    const CtcSetup s = CtcSetup::from_logits(logits, 0);
    const std::vector<int> labels{1, 2};
    const Matrix g = ctc_backward(s, labels);
    const Matrix p = softmax_rows(logits);
    for (std::size_t t = 0; t < 2; ++t)
      for (std::size_t v = 0; v < 4; ++v)
        CHECK(g(t, v) == doctest::Approx(p(t, v) - (static_cast<int>(v) == labels[t] ? 1.0 : 0.0)));
  }
  SUBCASE("finite differences on logits") {
    Rng rng(17);
    Matrix logits = random_matrix(rng, 4, 4);
    const std::vector<int> labels{2, 3};
    const Matrix g = ctc_backward(CtcSetup::from_logits(logits, 0), labels);
    const auto report = oracle::check_gradient("logits", logits.values(), g.values(), [&] {
      return ctc_forward(CtcSetup::from_logits(logits, 0), labels).loss;
    });
    CHECK(report.max_rel_error < 1e-5);
  }
  SUBCASE("rows sum to zero") {
    Rng rng(18);
    for (int trial = 0; trial < 20; ++trial) {
      const CtcSetup s = CtcSetup::from_logits(random_matrix(rng, 6, 5), 0);
      const std::vector<int> labels{1, 3, 3};
      const Matrix g = ctc_backward(s, labels);
      for (std::size_t t = 0; t < 6; ++t) {
        double sum = 0;
        for (double v : g.row(t)) sum += v;
        CHECK(std::abs(sum) < 1e-9);
      }
    }
  }
}

TEST_CASE("cross entropy") {
  Matrix logits(3, 5);
  const std::vector<int> targets{1, 2, 3};
  CHECK(cross_entropy(logits, targets, -1).loss == doctest::Approx(std::log(5.0)));

  double previous = std::numeric_limits<double>::infinity();
  for (double margin : {1.0, 5.0, 20.0, 50.0}) {
    Matrix m(1, 3);
    m(0, 2) = margin;
    const std::vector<int> t{2};
    const double loss = cross_entropy(m, t, -1).loss;
    CHECK(loss < previous);
    previous = loss;
  }
  CHECK(previous < 1e-20);

  const std::vector<int> ignored{-1, -1, -1};
  CHECK_THROWS_AS(cross_entropy(logits, ignored, -1), InvalidArgument);

  Rng rng(57);
  Matrix l = random_matrix(rng, 5, 7);
  const std::vector<int> t{0, 6, -1, 3, 3};
  const auto r = cross_entropy(l, t, -1);
  CHECK(r.counted == 4);
  for (double v : r.grad.row(2)) CHECK(v == 0.0);
  const auto report = oracle::check_gradient("logits", l.values(), r.grad.values(),
                                             [&] { return cross_entropy(l, t, -1).loss; });
  CHECK(report.max_rel_error < 1e-5);
}
