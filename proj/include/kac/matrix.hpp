#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace kac {

/// Dense real matrix, row-major, 64-bit floats throughout.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  const double* data() const { return data_.data(); }
  double* data() { return data_.data(); }
  std::span<const double> flat() const { return data_; }
  std::span<double> flat() { return data_; }

  /// Grows the matrix by `extra` rows; existing entries are preserved bit-for-bit.
  void append_rows(std::size_t extra, double fill = 0.0);

  bool all_finite() const;
  std::string shape_str() const;  // e.g. "3x4"

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Standard matrix product. OpenMP-parallel over output rows; every output
/// entry is accumulated in a fixed serial order, so the result does not
/// depend on the thread count.
Matrix matmul(const Matrix& a, const Matrix& b);

/// a * x for a vector x of length a.cols().
std::vector<double> matvec(const Matrix& a, std::span<const double> x);

/// Row-wise softmax with max-subtraction. Each output row sums to 1.
Matrix softmax_rows(const Matrix& m);

/// Softmax of a contiguous range of one vector, in place; entries outside
/// [lo, hi) are set to zero.
void softmax_range(std::span<double> v, std::size_t lo, std::size_t hi);

/// Exact bit-level equality (memcmp on the payload).
bool bits_equal(std::span<const double> a, std::span<const double> b);
bool bits_equal(const Matrix& a, const Matrix& b);

}  // namespace kac
