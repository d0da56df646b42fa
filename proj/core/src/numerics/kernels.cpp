#include "ualign/numerics/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ualign/numerics/error.hpp"
#include "ualign/numerics/rng.hpp"

namespace ualign {

double cosine_distance(std::span<const double> h, std::span<const double> e, double epsilon) {
  const double nh = std::max(norm(h), epsilon);
  const double ne = std::max(norm(e), epsilon);
  return 1.0 - dot(h, e) / (nh * ne);
}

Matrix cosine_distance_matrix(const Matrix& h, const Matrix& e, double epsilon) {
  if (h.cols() != e.cols()) {
    throw ShapeError("cosine_distance_matrix: H is " + h.shape_string() + " but E is " +
                     e.shape_string() + "; embedding widths must match");
  }
  if (!(epsilon > 0.0)) throw InvalidArgument("cosine_distance_matrix: epsilon must be > 0");
  std::vector<double> hn(h.rows()), en(e.rows());
  for (std::size_t i = 0; i < h.rows(); ++i) hn[i] = std::max(norm(h.row(i)), epsilon);
  for (std::size_t j = 0; j < e.rows(); ++j) en[j] = std::max(norm(e.row(j)), epsilon);
  Matrix c;
  gemm_nt(h, e, c);
  for (std::size_t i = 0; i < h.rows(); ++i) {
    for (std::size_t j = 0; j < e.rows(); ++j) c(i, j) = 1.0 - c(i, j) / (hn[i] * en[j]);
  }
  return c;
}

std::vector<double> cosine_distance_grad(std::span<const double> h, std::span<const double> e,
                                         double epsilon) {
  const double h_norm = norm(h);
  const double nh = std::max(h_norm, epsilon);
  const double ne = std::max(norm(e), epsilon);
  const double he = dot(h, e);
  std::vector<double> g(h.size());
  const double a = 1.0 / (nh * ne);
  // Radial term only exists while |h| is above the floor.
  const double b = h_norm >= epsilon ? he / (nh * nh * nh * ne) : 0.0;
  for (std::size_t k = 0; k < h.size(); ++k) g[k] = -(e[k] * a - h[k] * b);
  return g;
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("log_sum_exp of an empty vector");
  const double m = *std::max_element(values.begin(), values.end());
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

namespace {

constexpr int kPowerIterations = 20000;
constexpr std::uint64_t kPcaSeed = 0x5043413250ULL;

Matrix covariance(const Matrix& centered) {
  Matrix cov;
  gemm_tn(centered, centered, cov);
  const double inv_n = 1.0 / static_cast<double>(centered.rows());
  for (double& v : cov.values()) v *= inv_n;
  return cov;
}

}  // namespace

Matrix pca_components(const Matrix& points, std::size_t out_dims) {
  if (points.rows() < 2) throw InvalidArgument("pca_project needs at least 2 points");
  const std::size_t d = points.cols();
  Matrix centered = points;
  for (std::size_t k = 0; k < d; ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < points.rows(); ++i) mean += points(i, k);
    mean /= static_cast<double>(points.rows());
    for (std::size_t i = 0; i < points.rows(); ++i) centered(i, k) -= mean;
  }
  Matrix cov = covariance(centered);
  double trace = 0.0;
  for (std::size_t k = 0; k < d; ++k) trace += cov(k, k);

  Matrix comps(out_dims, d);
  if (!(trace > 0.0)) return comps;

  Rng rng(kPcaSeed);
  std::vector<double> v(d), w(d);
  for (std::size_t c = 0; c < std::min(out_dims, d); ++c) {
    for (auto& x : v) x = rng.normal();
    bool degenerate = false;
    for (int it = 0; it < kPowerIterations; ++it) {
      for (std::size_t r = 0; r < d; ++r) w[r] = dot(cov.row(r), v);
      const double n = norm(w);
      if (!(n > trace * 1e-14)) {
        degenerate = true;
        break;
      }
      double change = 0.0;
      for (std::size_t r = 0; r < d; ++r) {
        const double next = w[r] / n;
        change = std::max(change, std::abs(next - v[r]));
        v[r] = next;
      }
      if (change < 1e-13) break;
    }
    if (degenerate) break;
    const double tol = 1e-12;
    for (double x : v) {
      if (std::abs(x) > tol) {
        if (x < 0.0)
          for (auto& y : v) y = -y;
        break;
      }
    }
    for (std::size_t r = 0; r < d; ++r) w[r] = dot(cov.row(r), v);
    const double lambda = dot(v, w);
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t s = 0; s < d; ++s) cov(r, s) -= lambda * v[r] * v[s];
    std::copy(v.begin(), v.end(), comps.row(c).begin());
  }
  return comps;
}

Matrix pca_project(const Matrix& points, std::size_t out_dims) {
  Matrix comps = pca_components(points, out_dims);
  Matrix centered = points;
  for (std::size_t k = 0; k < points.cols(); ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < points.rows(); ++i) mean += points(i, k);
    mean /= static_cast<double>(points.rows());
    for (std::size_t i = 0; i < points.rows(); ++i) centered(i, k) -= mean;
  }
  Matrix out;
  gemm_nt(centered, comps, out);
  return out;
}

double gelu(double x) noexcept { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) noexcept {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

}  // namespace ualign
