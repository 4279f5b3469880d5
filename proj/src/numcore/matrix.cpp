#include "setad/numcore/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "setad/error.hpp"

namespace setad::numcore {

namespace {

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw Error(ErrorKind::shape,
              std::string(op) + ": incompatible shapes " + a.shape_string() + " and " + b.shape_string());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorKind::shape, "matrix data length " + std::to_string(data_.size()) +
                                      " does not match " + shape_string());
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw Error(ErrorKind::shape, "ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::row_vector(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Matrix::shape_string() const {
  std::ostringstream os;
  os << rows_ << "x" << cols_;
  return os.str();
}

Matrix Matrix::gather_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows_) throw Error(ErrorKind::shape, "row index out of range");
    std::copy_n(data_.begin() + indices[i] * cols_, cols_, out.data_.begin() + i * cols_);
  }
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double aip = a(i, p);
      auto b_row = b.row(p);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aip * b_row[j];
    }
  }
  return out;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) shape_error("matmul_transposed", a, b);
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto a_row = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto b_row = b.row(j);
      double acc = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) acc += a_row[p] * b_row[p];
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) shape_error("add", a, b);
  Matrix out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) shape_error("sub", a, b);
  Matrix out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bd[i];
  return out;
}

Matrix add_row(const Matrix& a, const Matrix& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) shape_error("add_row", a, bias);
  Matrix out = a;
  auto b = bias.row(0);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += b[j];
  }
  return out;
}

Matrix scale(const Matrix& a, double factor) {
  Matrix out = a;
  for (double& v : out.data()) v *= factor;
  return out;
}

Matrix relu(const Matrix& a) {
  Matrix out = a;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Matrix abs(const Matrix& a) {
  Matrix out = a;
  for (double& v : out.data()) v = std::fabs(v);
  return out;
}

Matrix square(const Matrix& a) {
  Matrix out = a;
  for (double& v : out.data()) v = v * v;
  return out;
}

Matrix softmax_rows(const Matrix& a) {
  if (a.empty()) throw Error(ErrorKind::shape, "softmax_rows: empty matrix");
  Matrix out = a;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    const double peak = *std::max_element(r.begin(), r.end());
    double total = 0.0;
    for (double& v : r) {
      v = std::exp(v - peak);
      total += v;
    }
    for (double& v : r) v /= total;
  }
  return out;
}

Matrix sum_rows(const Matrix& a) {
  Matrix out(1, a.cols());
  auto o = out.row(0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) o[j] += r[j];
  }
  return out;
}

Matrix sum_cols(const Matrix& a) {
  Matrix out(a.rows(), 1);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double acc = 0.0;
    for (double v : a.row(i)) acc += v;
    out(i, 0) = acc;
  }
  return out;
}

Matrix max_rows(const Matrix& a) {
  if (a.rows() == 0) throw Error(ErrorKind::shape, "max_rows: matrix has no rows");
  Matrix out(1, a.cols(), -std::numeric_limits<double>::infinity());
  auto o = out.row(0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) o[j] = std::max(o[j], r[j]);
  }
  return out;
}

Matrix mean(const Matrix& a) {
  if (a.empty()) throw Error(ErrorKind::shape, "mean: empty matrix");
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return Matrix(1, 1, acc / static_cast<double>(a.size()));
}

Matrix concat_cols(std::span<const Matrix> parts) {
  if (parts.empty()) return {};
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) shape_error("concat_cols", parts.front(), p);
    cols += p.cols();
  }
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    auto o = out.row(i);
    std::size_t offset = 0;
    for (const auto& p : parts) {
      auto r = p.row(i);
      std::copy(r.begin(), r.end(), o.begin() + offset);
      offset += r.size();
    }
  }
  return out;
}

Matrix slice_cols(const Matrix& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.cols()) {
    throw Error(ErrorKind::shape, "slice_cols: columns [" + std::to_string(begin) + ", " +
                                      std::to_string(begin + count) + ") out of range for " +
                                      a.shape_string());
  }
  Matrix out(a.rows(), count);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i).subspan(begin, count);
    std::copy(r.begin(), r.end(), out.row(i).begin());
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

}  // namespace setad::numcore
