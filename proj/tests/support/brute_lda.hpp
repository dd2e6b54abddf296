#pragma once

// Brute-force LDA + Mahalanobis reference, implemented from the definitions
// with its own Jacobi eigensolver and Gauss-Jordan inverse.  Shared by the
// fesc suite and the acceptance gate; deliberately slow and explicit.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "cyclemon/fesc.hpp"

namespace brute {

namespace la = cyclemon::la;
using cyclemon::kLdaGamma;
using la::Matrix;

struct BruteLda {
  Matrix proj;  // k x d
  std::vector<int> codes;
  Matrix means;  // C x d
  Matrix cov_inv;
};

inline void brute_jacobi(Matrix a, std::vector<double>& vals, Matrix& vecs) {
  const std::size_t n = a.rows;
  vecs = Matrix::identity(n);
  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-26) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1);
        const double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a(i, p), aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double api = a(p, i), aqi = a(q, i);
          a(p, i) = c * api - s * aqi;
          a(q, i) = s * api + c * aqi;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = vecs(i, p), viq = vecs(i, q);
          vecs(i, p) = c * vip - s * viq;
          vecs(i, q) = s * vip + c * viq;
        }
      }
  }
  vals.resize(n);
  for (std::size_t i = 0; i < n; ++i) vals[i] = a(i, i);
}

inline Matrix brute_inverse(Matrix a) {
  const std::size_t n = a.rows;
  Matrix inv = Matrix::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a(r, col)) > std::fabs(a(piv, col))) piv = r;
    for (std::size_t c = 0; c < n; ++c) {
      std::swap(a(col, c), a(piv, c));
      std::swap(inv(col, c), inv(piv, c));
    }
    const double d = a(col, col);
    for (std::size_t c = 0; c < n; ++c) {
      a(col, c) /= d;
      inv(col, c) /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a(r, col);
      for (std::size_t c = 0; c < n; ++c) {
        a(r, c) -= f * a(col, c);
        inv(r, c) -= f * inv(col, c);
      }
    }
  }
  return inv;
}

inline BruteLda brute_fit(const Matrix& x, const std::vector<int>& y,
                          Matrix* sb_out, Matrix* sw_reg_out) {
  const std::size_t n = x.rows, k = x.cols;
  std::map<int, std::vector<std::size_t>> by;
  for (std::size_t i = 0; i < n; ++i) by[y[i]].push_back(i);
  const std::size_t C = by.size();

  std::vector<double> grand(k, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) grand[j] += x(i, j) / n;

  Matrix sw(k, k), sb(k, k);
  std::vector<std::vector<double>> mus;
  std::vector<int> codes;
  for (auto& [code, rows] : by) {
    std::vector<double> mu(k, 0);
    for (std::size_t i : rows)
      for (std::size_t j = 0; j < k; ++j) mu[j] += x(i, j) / rows.size();
    for (std::size_t i : rows)
      for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b)
          sw(a, b) += (x(i, a) - mu[a]) * (x(i, b) - mu[b]);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b)
        sb(a, b) += rows.size() * (mu[a] - grand[a]) * (mu[b] - grand[b]);
    mus.push_back(mu);
    codes.push_back(code);
  }

  double tr = 0;
  for (std::size_t a = 0; a < k; ++a) tr += sw(a, a);
  const double ridge = std::max(kLdaGamma * tr / k, 1e-12);
  Matrix swr = sw;
  for (std::size_t a = 0; a < k; ++a) swr(a, a) += ridge;

  // W^{-1/2} via eigendecomposition, then symmetric reduction
  std::vector<double> wvals;
  Matrix wvecs;
  brute_jacobi(swr, wvals, wvecs);
  Matrix whalf(k, k);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b)
      for (std::size_t j = 0; j < k; ++j)
        whalf(a, b) += wvecs(a, j) * wvecs(b, j) / std::sqrt(wvals[j]);

  const Matrix reduced = la::matmul(whalf, la::matmul(sb, whalf));
  std::vector<double> rvals;
  Matrix rvecs;
  brute_jacobi(reduced, rvals, rvecs);

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return rvals[a] > rvals[b]; });

  const std::size_t d = std::min(k, C - 1);
  BruteLda out;
  out.proj = Matrix(k, d);
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> w(k, 0);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b)
        w[a] += whalf(a, b) * rvecs(b, order[j]);
    double norm = 0;
    for (double v : w) norm += v * v;
    for (double& v : w) v /= std::sqrt(norm);
    for (std::size_t a = 0; a < k; ++a) out.proj(a, j) = w[a];
  }
  out.codes = codes;

  // projected means + pooled covariance (divisor n - C) with ridge
  out.means = Matrix(C, d);
  std::vector<std::vector<double>> pmu(C, std::vector<double>(d, 0));
  for (std::size_t ci = 0; ci < C; ++ci)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t a = 0; a < k; ++a) {
        pmu[ci][j] += out.proj(a, j) * mus[ci][a];
      }
  for (std::size_t ci = 0; ci < C; ++ci)
    for (std::size_t j = 0; j < d; ++j) out.means(ci, j) = pmu[ci][j];

  Matrix pooled(d, d);
  std::size_t ci = 0;
  for (auto& [code, rows] : by) {
    for (std::size_t i : rows) {
      std::vector<double> z(d, 0);
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t a = 0; a < k; ++a) z[j] += out.proj(a, j) * x(i, a);
      for (std::size_t aa = 0; aa < d; ++aa)
        for (std::size_t bb = 0; bb < d; ++bb)
          pooled(aa, bb) += (z[aa] - pmu[ci][aa]) * (z[bb] - pmu[ci][bb]);
    }
    ++ci;
  }
  for (double& v : pooled.a) v /= static_cast<double>(n - C);
  double trp = 0;
  for (std::size_t a = 0; a < d; ++a) trp += pooled(a, a);
  const double rp = std::max(kLdaGamma * trp / d, 1e-12);
  for (std::size_t a = 0; a < d; ++a) pooled(a, a) += rp;
  out.cov_inv = brute_inverse(pooled);

  if (sb_out) *sb_out = sb;
  if (sw_reg_out) *sw_reg_out = swr;
  return out;
}

inline int brute_classify(const BruteLda& m, const std::vector<double>& x) {
  const std::size_t k = m.proj.rows, d = m.proj.cols;
  std::vector<double> z(d, 0);
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t a = 0; a < k; ++a) z[j] += m.proj(a, j) * x[a];
  double best = 0;
  int code = 0;
  bool first = true;
  for (std::size_t ci = 0; ci < m.codes.size(); ++ci) {
    double dist = 0;
    for (std::size_t aa = 0; aa < d; ++aa)
      for (std::size_t bb = 0; bb < d; ++bb)
        dist += (z[aa] - m.means(ci, aa)) * m.cov_inv(aa, bb) *
                (z[bb] - m.means(ci, bb));
    if (first || dist < best) {
      best = dist;
      code = m.codes[ci];
      first = false;
    }
  }
  return code;
}

}  // namespace brute
