#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ualign/numerics/matrix.hpp"

namespace ualign {

// A named parameter with paired gradient storage. Matrices are stored
// row-major with shape {rows, cols}; vectors have shape {n}; scalars {1}.
struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;

  Tensor() = default;
  Tensor(std::string name, std::vector<std::size_t> shape);

  std::size_t numel() const noexcept { return value.size(); }
  std::size_t rows() const noexcept { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const noexcept;

  void zero_grad();
  std::string shape_string() const;

  // Copies between the flat value buffer and a Matrix view of a 2-D tensor.
  Matrix as_matrix() const;
  // 2-D view of the value buffer as rows x cols (leading dim by the rest).
  MatrixView view() const noexcept { return {value.data(), rows(), cols()}; }
};

std::size_t shape_numel(std::span<const std::size_t> shape);

void zero_grads(std::span<Tensor> tensors);
bool same_values(std::span<const Tensor> a, std::span<const Tensor> b);

// SHA-256 over names, shapes and little-endian values, as lowercase hex.
std::string tensor_digest(std::span<const Tensor> tensors);

// SHA-256 of a byte string, as lowercase hex.
std::string sha256_hex(std::string_view bytes);

}  // namespace ualign
