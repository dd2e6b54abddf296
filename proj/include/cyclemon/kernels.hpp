#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace cyclemon::kernels {

// Double-precision micro-kernels behind the numeric hot loops (convolution,
// dense layers, moments, optimizer updates). One scalar reference table plus
// SIMD variants selected at runtime; all variants must agree within rounding
// (see tests/test_kernels.cpp).
struct Ops {
  const char* name;

  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // x *= alpha
  void (*scale)(double alpha, double* x, std::size_t n);
  void (*relu_fwd)(const double* x, double* y, std::size_t n);
  // gx += gy where x > 0
  void (*relu_bwd)(const double* x, const double* gy, double* gx, std::size_t n);
  // y[r * incy] += dot(A[r, :], x)   A is rows x cols with leading dim lda
  void (*matvec_acc)(const double* a, std::size_t rows, std::size_t cols,
                     std::size_t lda, const double* x, double* y,
                     std::size_t incy);
  // y[c] += sum_r g[r * incg] * A[r, c]
  void (*matvec_t_acc)(const double* a, std::size_t rows, std::size_t cols,
                       std::size_t lda, const double* g, std::size_t incg,
                       double* y);
  // K[r, :] += g[r * incg] * x   K is rows x cols with leading dim ldk
  void (*rank1_acc)(const double* g, std::size_t rows, std::size_t incg,
                    const double* x, std::size_t cols, double* k,
                    std::size_t ldk);
  // Adam with precomputed bias corrections bc1 = 1 - b1^t, bc2 = 1 - b2^t.
  void (*adam_step)(double* p, const double* g, double* m, double* v,
                    std::size_t n, double lr, double b1, double b2, double eps,
                    double bc1, double bc2);
  // Central power sums around a given mean: m2 = sum d^2, m3 = sum d^3,
  // m4 = sum d^4 with d = x[i] - mean.
  void (*central_sums)(const double* x, std::size_t n, double mean, double* m2,
                       double* m3, double* m4);
};

const Ops& scalar_ops();
const Ops* avx2_ops();  // nullptr when not compiled in
const Ops* neon_ops();  // nullptr when not compiled in

// Active backend. Default picks the widest variant the CPU supports; the
// CYCLEMON_KERNELS environment variable ("scalar", "avx2", "neon", "auto")
// overrides, as does set_backend().
const Ops& active();
bool set_backend(std::string_view name);
std::vector<const Ops*> available();

inline double dot(const double* a, const double* b, std::size_t n) {
  return active().dot(a, b, n);
}
inline double sum(const double* x, std::size_t n) { return active().sum(x, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}
inline void scale(double alpha, double* x, std::size_t n) {
  active().scale(alpha, x, n);
}
inline void relu_fwd(const double* x, double* y, std::size_t n) {
  active().relu_fwd(x, y, n);
}
inline void relu_bwd(const double* x, const double* gy, double* gx,
                     std::size_t n) {
  active().relu_bwd(x, gy, gx, n);
}
inline void matvec_acc(const double* a, std::size_t rows, std::size_t cols,
                       std::size_t lda, const double* x, double* y,
                       std::size_t incy) {
  active().matvec_acc(a, rows, cols, lda, x, y, incy);
}
inline void matvec_t_acc(const double* a, std::size_t rows, std::size_t cols,
                         std::size_t lda, const double* g, std::size_t incg,
                         double* y) {
  active().matvec_t_acc(a, rows, cols, lda, g, incg, y);
}
inline void rank1_acc(const double* g, std::size_t rows, std::size_t incg,
                      const double* x, std::size_t cols, double* k,
                      std::size_t ldk) {
  active().rank1_acc(g, rows, incg, x, cols, k, ldk);
}
inline void adam_step(double* p, const double* g, double* m, double* v,
                      std::size_t n, double lr, double b1, double b2,
                      double eps, double bc1, double bc2) {
  active().adam_step(p, g, m, v, n, lr, b1, b2, eps, bc1, bc2);
}
inline void central_sums(const double* x, std::size_t n, double mean,
                         double* m2, double* m3, double* m4) {
  active().central_sums(x, n, mean, m2, m3, m4);
}

}  // namespace cyclemon::kernels
