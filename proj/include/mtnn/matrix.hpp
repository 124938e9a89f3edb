#pragma once

#include <cstddef>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mtnn/errors.hpp"

namespace mtnn {

// Dense row-major single-precision matrix. Both extents are always >= 1.
class Matrix {
 public:
  Matrix(std::size_t rows, std::size_t cols) : rows_{rows}, cols_{cols} {
    check_extents();
    data_.assign(rows * cols, 0.0f);
  }

  Matrix(std::size_t rows, std::size_t cols, std::vector<float> data)
      : rows_{rows}, cols_{cols}, data_{std::move(data)} {
    check_extents();
    if (data_.size() != rows * cols) {
      std::ostringstream os;
      os << "matrix data has " << data_.size() << " elements, expected "
         << rows << "x" << cols;
      throw DimensionMismatch(os.str());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0f;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  float& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  float operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  std::span<const float> row(std::size_t i) const noexcept {
    return std::span<const float>(data_).subspan(i * cols_, cols_);
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  void check_extents() const {
    if (rows_ == 0 || cols_ == 0) {
      throw std::invalid_argument("matrix extents must be positive");
    }
  }

  std::size_t rows_;
  std::size_t cols_;
  std::vector<float> data_;
};

// Extents of C = A x B^T with A (m x k), B (n x k), C (m x n).
struct ProblemShape {
  std::size_t m = 1;
  std::size_t n = 1;
  std::size_t k = 1;

  bool valid() const noexcept { return m >= 1 && n >= 1 && k >= 1; }
  double flops() const noexcept {
    return 2.0 * static_cast<double>(m) * static_cast<double>(n) * static_cast<double>(k);
  }

  friend bool operator==(const ProblemShape&, const ProblemShape&) = default;
  friend auto operator<=>(const ProblemShape&, const ProblemShape&) = default;
};

inline std::string to_string(const ProblemShape& s) {
  std::ostringstream os;
  os << "(" << s.m << "," << s.n << "," << s.k << ")";
  return os.str();
}

}  // namespace mtnn
