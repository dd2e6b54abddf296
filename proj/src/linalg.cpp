#include "cyclemon/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cyclemon/error.hpp"

namespace cyclemon::la {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix matmul(const Matrix& x, const Matrix& y) {
  if (x.cols != y.rows) raise_numeric("ShapeMismatch", "matmul dimensions");
  Matrix out(x.rows, y.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t k = 0; k < x.cols; ++k) {
      const double v = x(i, k);
      if (v == 0.0) continue;
      for (std::size_t j = 0; j < y.cols; ++j) out(i, j) += v * y(k, j);
    }
  }
  return out;
}

Matrix transpose(const Matrix& x) {
  Matrix out(x.cols, x.rows);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) out(j, i) = x(i, j);
  return out;
}

std::vector<double> matvec(const Matrix& x, const std::vector<double>& v) {
  if (x.cols != v.size()) raise_numeric("ShapeMismatch", "matvec dimensions");
  std::vector<double> out(x.rows, 0.0);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) s += x(i, j) * v[j];
    out[i] = s;
  }
  return out;
}

Matrix cholesky(const Matrix& a) {
  if (a.rows != a.cols) raise_numeric("ShapeMismatch", "cholesky: not square");
  const std::size_t n = a.rows;
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0) || !std::isfinite(diag)) {
      raise_numeric("NumericalFailure", "cholesky: matrix not positive definite");
    }
    l(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

std::vector<double> solve_lower(const Matrix& l, const std::vector<double>& b) {
  const std::size_t n = l.rows;
  if (b.size() != n) raise_numeric("ShapeMismatch", "solve_lower dimensions");
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  return y;
}

std::vector<double> solve_lower_t(const Matrix& l, const std::vector<double>& b) {
  const std::size_t n = l.rows;
  if (b.size() != n) raise_numeric("ShapeMismatch", "solve_lower_t dimensions");
  std::vector<double> x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

Matrix invert_spd(const Matrix& a) {
  const Matrix l = cholesky(a);
  const std::size_t n = a.rows;
  Matrix inv(n, n);
  std::vector<double> e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    const std::vector<double> col = solve_lower_t(l, solve_lower(l, e));
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
    e[j] = 0.0;
  }
  // Clean up rounding asymmetry.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double m = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = m;
      inv(j, i) = m;
    }
  }
  return inv;
}

namespace {

double off_diag_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

void sort_descending(EigenSym& e) {
  const std::size_t n = e.values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return e.values[x] > e.values[y];
  });
  EigenSym sorted;
  sorted.values.resize(n);
  sorted.vectors = Matrix(e.vectors.rows, n);
  for (std::size_t j = 0; j < n; ++j) {
    sorted.values[j] = e.values[order[j]];
    for (std::size_t i = 0; i < e.vectors.rows; ++i)
      sorted.vectors(i, j) = e.vectors(i, order[j]);
  }
  e = std::move(sorted);
}

}  // namespace

EigenSym jacobi_eigen(const Matrix& a_in, std::size_t max_sweeps, double tol) {
  if (a_in.rows != a_in.cols)
    raise_numeric("ShapeMismatch", "jacobi_eigen: not square");
  const std::size_t n = a_in.rows;
  Matrix a = a_in;
  Matrix v = Matrix::identity(n);

  double scale = 0.0;
  for (double x : a.a) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) scale = 1.0;

  bool converged = (n < 2);
  for (std::size_t sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= tol * scale * 1e-3) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    converged = off_diag_norm(a) <= tol * scale * static_cast<double>(n);
  }
  if (!converged)
    raise_numeric("NumericalFailure", "jacobi_eigen: no convergence");

  EigenSym out;
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = a(i, i);
  out.vectors = std::move(v);
  sort_descending(out);
  return out;
}

EigenSym generalized_eigen_spd(const Matrix& b, const Matrix& w) {
  if (b.rows != b.cols || w.rows != w.cols || b.rows != w.rows)
    raise_numeric("ShapeMismatch", "generalized_eigen_spd dimensions");
  const std::size_t n = b.rows;
  const Matrix l = cholesky(w);

  // C = L^{-1} B L^{-T}, built column by column through triangular solves.
  Matrix x(n, n);
  std::vector<double> col(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = b(i, j);
    const std::vector<double> y = solve_lower(l, col);
    for (std::size_t i = 0; i < n; ++i) x(i, j) = y[i];
  }
  Matrix c(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) col[j] = x(i, j);
    const std::vector<double> y = solve_lower(l, col);
    for (std::size_t j = 0; j < n; ++j) c(i, j) = y[j];
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double m = 0.5 * (c(i, j) + c(j, i));
      c(i, j) = m;
      c(j, i) = m;
    }
  }

  EigenSym reduced = jacobi_eigen(c);

  EigenSym out;
  out.values = reduced.values;
  out.vectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = reduced.vectors(i, j);
    std::vector<double> wj = solve_lower_t(l, col);
    double norm = 0.0;
    for (double v : wj) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      std::size_t arg = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (std::abs(wj[i]) > std::abs(wj[arg])) arg = i;
      const double sign = wj[arg] < 0.0 ? -1.0 : 1.0;
      for (double& v : wj) v *= sign / norm;
    }
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = wj[i];
  }
  return out;
}

}  // namespace cyclemon::la
