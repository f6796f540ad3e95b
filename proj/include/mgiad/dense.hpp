#pragma once

// Small double-precision dense matrices. Used by the matrix oracles
// (explicit convolution operators, two-grid error propagation) and the
// coarsest-level direct solve. Not a performance path.

#include <cstdint>
#include <vector>

namespace mgiad::dense {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::int64_t rows, std::int64_t cols)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows * cols), 0.0) {}

  static Matrix identity(std::int64_t n);

  std::int64_t rows() const { return rows_; }
  std::int64_t cols() const { return cols_; }

  double& operator()(std::int64_t i, std::int64_t j) { return data_[static_cast<std::size_t>(i * cols_ + j)]; }
  double operator()(std::int64_t i, std::int64_t j) const { return data_[static_cast<std::size_t>(i * cols_ + j)]; }

  const std::vector<double>& data() const { return data_; }

 private:
  std::int64_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

std::vector<double> matvec(const Matrix& a, const std::vector<double>& x);
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix scale(const Matrix& a, double s);

// Partial-pivot Gaussian elimination; throws UsageError on singular systems.
std::vector<double> solve(Matrix a, std::vector<double> b);
Matrix inverse(const Matrix& a);

double max_abs_diff(const Matrix& a, const Matrix& b);
double norm2(const std::vector<double>& v);

}  // namespace mgiad::dense
