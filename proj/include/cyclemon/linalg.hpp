#pragma once

#include <cstddef>
#include <vector>

namespace cyclemon::la {

// Small dense row-major matrix. Sized for feature-space work (k <= 68),
// not for anything performance-critical.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return a[r * cols + c];
  }

  static Matrix identity(std::size_t n);
};

Matrix matmul(const Matrix& x, const Matrix& y);
Matrix transpose(const Matrix& x);
std::vector<double> matvec(const Matrix& x, const std::vector<double>& v);

// Lower-triangular L with A = L * L^T. Raises NumericalFailure when A is not
// positive definite (or not finite).
Matrix cholesky(const Matrix& a);

// Solve L y = b (L lower triangular) and L^T x = b (same L).
std::vector<double> solve_lower(const Matrix& l, const std::vector<double>& b);
std::vector<double> solve_lower_t(const Matrix& l, const std::vector<double>& b);

// Inverse of a symmetric positive-definite matrix via Cholesky.
Matrix invert_spd(const Matrix& a);

struct EigenSym {
  std::vector<double> values;  // descending
  Matrix vectors;              // column j pairs with values[j]
};

// Cyclic Jacobi for symmetric matrices. Raises NumericalFailure when the
// off-diagonal mass fails to vanish within max_sweeps.
EigenSym jacobi_eigen(const Matrix& a, std::size_t max_sweeps = 64,
                      double tol = 1e-13);

// Generalized symmetric problem B w = lambda W w with W SPD, reduced through
// the Cholesky factor of W. Eigenvectors are returned unit-normalized with a
// deterministic sign (largest-magnitude component positive).
EigenSym generalized_eigen_spd(const Matrix& b, const Matrix& w);

}  // namespace cyclemon::la
