#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace setad::numcore {

// Dense row-major matrix of doubles. Vectors are 1×n or n×1 matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix row_vector(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const noexcept;
  std::string shape_string() const;

  // Rows selected by index, in the given order.
  Matrix gather_rows(std::span<const std::size_t> indices) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Forward kernels. Each one is shared by the untaped path and the tape so the
// two produce bitwise-identical values.

Matrix matmul(const Matrix& a, const Matrix& b);
// a · bᵀ
Matrix matmul_transposed(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
// Adds the 1×c row `bias` to every row of `a`.
Matrix add_row(const Matrix& a, const Matrix& bias);
Matrix scale(const Matrix& a, double factor);
Matrix relu(const Matrix& a);
Matrix abs(const Matrix& a);
Matrix square(const Matrix& a);
Matrix softmax_rows(const Matrix& a);
// Column-wise sum over rows: r×c -> 1×c.
Matrix sum_rows(const Matrix& a);
// Row-wise sum over columns: r×c -> r×1.
Matrix sum_cols(const Matrix& a);
// Column-wise max over rows: r×c -> 1×c.
Matrix max_rows(const Matrix& a);
// Mean of all entries: -> 1×1.
Matrix mean(const Matrix& a);
Matrix concat_cols(std::span<const Matrix> parts);
Matrix slice_cols(const Matrix& a, std::size_t begin, std::size_t count);
Matrix transpose(const Matrix& a);

}  // namespace setad::numcore
