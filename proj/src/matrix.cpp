#include "kac/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "kac/error.hpp"

namespace kac {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows_ * cols_) {
    std::ostringstream os;
    os << "Matrix: " << data_.size() << " values for shape " << rows_ << "x" << cols_;
    throw DimensionError(os.str());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("Matrix::from_rows: ragged row lengths");
    std::copy(row.begin(), row.end(), m.data() + i * c);
    ++i;
  }
  return m;
}

void Matrix::append_rows(std::size_t extra, double fill) {
  data_.resize((rows_ + extra) * cols_, fill);
  rows_ += extra;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Matrix::shape_str() const {
  std::ostringstream os;
  os << rows_ << "x" << cols_;
  return os.str();
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree, " + a.shape_str() + " vs " +
                         b.shape_str());
  }
  Matrix c(a.rows(), b.cols());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(a.rows());
  const std::size_t work = a.rows() * a.cols() * b.cols();
#pragma omp parallel for schedule(static) if (work >= 32768)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto ri = static_cast<std::size_t>(i);
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(ri, k) * b(k, j);
      c(ri, j) = acc;
    }
  }
  return c;
}

std::vector<double> matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) {
    std::ostringstream os;
    os << "matvec: " << a.shape_str() << " vs vector of length " << x.size();
    throw DimensionError(os.str());
  }
  std::vector<double> y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double acc = 0.0;
    const double* row = a.data() + i * a.cols();
    for (std::size_t k = 0; k < a.cols(); ++k) acc += row[k] * x[k];
    y[i] = acc;
  }
  return y;
}

Matrix softmax_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto src = m.row(i);
    auto dst = out.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
    softmax_range(dst, 0, m.cols());
  }
  return out;
}

void softmax_range(std::span<double> v, std::size_t lo, std::size_t hi) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = lo; j < hi; ++j) mx = std::max(mx, v[j]);
  double sum = 0.0;
  for (std::size_t j = lo; j < hi; ++j) {
    v[j] = std::exp(v[j] - mx);
    sum += v[j];
  }
  for (std::size_t j = 0; j < lo; ++j) v[j] = 0.0;
  for (std::size_t j = lo; j < hi; ++j) v[j] /= sum;
  for (std::size_t j = hi; j < v.size(); ++j) v[j] = 0.0;
}

bool bits_equal(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  return a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

bool bits_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && bits_equal(a.flat(), b.flat());
}

}  // namespace kac
