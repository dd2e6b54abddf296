#include <cmath>
#include <cstddef>

#include "cyclemon/kernels.hpp"

// Reference kernels. Plain loops, no reassociation tricks: these define the
// semantics the SIMD variants are tested against.

namespace cyclemon::kernels {
namespace {

double k_dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double k_sum(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

void k_axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void k_scale(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void k_relu_fwd(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void k_relu_bwd(const double* x, const double* gy, double* gx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > 0.0) gx[i] += gy[i];
  }
}

void k_matvec_acc(const double* a, std::size_t rows, std::size_t cols,
                  std::size_t lda, const double* x, double* y,
                  std::size_t incy) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = a + r * lda;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r * incy] += acc;
  }
}

void k_matvec_t_acc(const double* a, std::size_t rows, std::size_t cols,
                    std::size_t lda, const double* g, std::size_t incg,
                    double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = a + r * lda;
    const double gr = g[r * incg];
    for (std::size_t c = 0; c < cols; ++c) y[c] += gr * row[c];
  }
}

void k_rank1_acc(const double* g, std::size_t rows, std::size_t incg,
                 const double* x, std::size_t cols, double* k,
                 std::size_t ldk) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* krow = k + r * ldk;
    const double gr = g[r * incg];
    for (std::size_t c = 0; c < cols; ++c) krow[c] += gr * x[c];
  }
}

void k_adam_step(double* p, const double* g, double* m, double* v,
                 std::size_t n, double lr, double b1, double b2, double eps,
                 double bc1, double bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

void k_central_sums(const double* x, std::size_t n, double mean, double* m2,
                    double* m3, double* m4) {
  double s2 = 0.0, s3 = 0.0, s4 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - mean;
    const double d2 = d * d;
    s2 += d2;
    s3 += d2 * d;
    s4 += d2 * d2;
  }
  *m2 = s2;
  *m3 = s3;
  *m4 = s4;
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops table = {
      "scalar",    k_dot,          k_sum,       k_axpy,
      k_scale,     k_relu_fwd,     k_relu_bwd,  k_matvec_acc,
      k_matvec_t_acc, k_rank1_acc, k_adam_step, k_central_sums,
  };
  return table;
}

}  // namespace cyclemon::kernels
