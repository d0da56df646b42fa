#include "ualign/numerics/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "ualign/numerics/error.hpp"

namespace ualign {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                     " does not match shape " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged initializer for Matrix::from_rows");
    std::copy(row.begin(), row.end(), m.row(i).begin());
    ++i;
  }
  return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

std::string MatrixView::shape_string() const {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

namespace {

void require(bool ok, const char* op, MatrixView a, MatrixView b) {
  if (!ok) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                     b.shape_string());
  }
}

void prepare_output(Matrix& c, std::size_t rows, std::size_t cols, bool accumulate) {
  if (accumulate) {
    if (c.rows() != rows || c.cols() != cols) {
      throw ShapeError("gemm accumulate target has shape " + c.shape_string() + ", expected " +
                       std::to_string(rows) + "x" + std::to_string(cols));
    }
  } else if (c.rows() != rows || c.cols() != cols) {
    c = Matrix(rows, cols);
  } else {
    c.fill(0.0);
  }
}

}  // namespace

void gemm_nn(MatrixView a, MatrixView b, Matrix& c, bool accumulate) {
  require(a.cols == b.rows, "gemm_nn", a, b);
  prepare_output(c, a.rows, b.cols, accumulate);
  const std::size_t n = b.cols;
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* crow = c.data() + i * n;
    const double* arow = a.data + i * a.cols;
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double av = arow[k];
      const double* brow = b.data + k * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(MatrixView a, MatrixView b, Matrix& c, bool accumulate) {
  require(a.cols == b.cols, "gemm_nt", a, b);
  prepare_output(c, a.rows, b.rows, accumulate);
  const std::size_t k = a.cols;
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.data + i * k;
    double* crow = c.data() + i * b.rows;
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* brow = b.data + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] += s;
    }
  }
}

void gemm_tn(MatrixView a, MatrixView b, Matrix& c, bool accumulate) {
  require(a.rows == b.rows, "gemm_tn", a, b);
  prepare_output(c, a.cols, b.cols, accumulate);
  const std::size_t n = b.cols;
  for (std::size_t p = 0; p < a.rows; ++p) {
    const double* arow = a.data + p * a.cols;
    const double* brow = b.data + p * n;
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c;
  gemm_nn(a, b, c);
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Matrix slice_rows(const Matrix& m, std::size_t begin, std::size_t end) {
  if (begin > end || end > m.rows()) {
    throw ShapeError("slice_rows [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + m.shape_string());
  }
  Matrix out(end - begin, m.cols());
  std::copy(m.data() + begin * m.cols(), m.data() + end * m.cols(), out.data());
  return out;
}

}  // namespace ualign
