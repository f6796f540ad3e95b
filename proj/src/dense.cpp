#include "mgiad/dense.hpp"

#include <cmath>
#include <cstdlib>

#include "mgiad/errors.hpp"

namespace mgiad::dense {

Matrix Matrix::identity(std::int64_t n) {
  Matrix m(n, n);
  for (std::int64_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::vector<double> matvec(const Matrix& a, const std::vector<double>& x) {
  if (static_cast<std::int64_t>(x.size()) != a.cols())
    throw UsageError("matvec: dimension mismatch");
  std::vector<double> y(static_cast<std::size_t>(a.rows()), 0.0);
  for (std::int64_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::int64_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[static_cast<std::size_t>(j)];
    y[static_cast<std::size_t>(i)] = s;
  }
  return y;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw UsageError("matmul: dimension mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::int64_t i = 0; i < a.rows(); ++i)
    for (std::int64_t k = 0; k < a.cols(); ++k) {
      double v = a(i, k);
      if (v == 0.0) continue;
      for (std::int64_t j = 0; j < b.cols(); ++j) c(i, j) += v * b(k, j);
    }
  return c;
}

Matrix add(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), a.cols());
  for (std::int64_t i = 0; i < a.rows(); ++i)
    for (std::int64_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) + b(i, j);
  return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), a.cols());
  for (std::int64_t i = 0; i < a.rows(); ++i)
    for (std::int64_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) - b(i, j);
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::int64_t i = 0; i < a.rows(); ++i)
    for (std::int64_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Matrix scale(const Matrix& a, double s) {
  Matrix c(a.rows(), a.cols());
  for (std::int64_t i = 0; i < a.rows(); ++i)
    for (std::int64_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) * s;
  return c;
}

std::vector<double> solve(Matrix a, std::vector<double> b) {
  const std::int64_t n = a.rows();
  if (a.cols() != n || static_cast<std::int64_t>(b.size()) != n)
    throw UsageError("solve: system must be square");
  for (std::int64_t k = 0; k < n; ++k) {
    std::int64_t piv = k;
    for (std::int64_t i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
    if (std::abs(a(piv, k)) < 1e-300) throw UsageError("solve: singular matrix");
    if (piv != k) {
      for (std::int64_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
      std::swap(b[static_cast<std::size_t>(k)], b[static_cast<std::size_t>(piv)]);
    }
    for (std::int64_t i = k + 1; i < n; ++i) {
      double f = a(i, k) / a(k, k);
      if (f == 0.0) continue;
      for (std::int64_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
      b[static_cast<std::size_t>(i)] -= f * b[static_cast<std::size_t>(k)];
    }
  }
  std::vector<double> x(static_cast<std::size_t>(n), 0.0);
  for (std::int64_t i = n - 1; i >= 0; --i) {
    double s = b[static_cast<std::size_t>(i)];
    for (std::int64_t j = i + 1; j < n; ++j) s -= a(i, j) * x[static_cast<std::size_t>(j)];
    x[static_cast<std::size_t>(i)] = s / a(i, i);
  }
  return x;
}

Matrix inverse(const Matrix& a) {
  const std::int64_t n = a.rows();
  Matrix inv(n, n);
  for (std::int64_t j = 0; j < n; ++j) {
    std::vector<double> e(static_cast<std::size_t>(n), 0.0);
    e[static_cast<std::size_t>(j)] = 1.0;
    auto col = solve(a, std::move(e));
    for (std::int64_t i = 0; i < n; ++i) inv(i, j) = col[static_cast<std::size_t>(i)];
  }
  return inv;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw UsageError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::int64_t i = 0; i < a.rows(); ++i)
    for (std::int64_t j = 0; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j) - b(i, j)));
  return m;
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace mgiad::dense
