#include "cyclemon/kernels.hpp"

// AVX2/FMA variants, compiled with -mavx2 -mfma for this translation unit
// only. Callers must go through the dispatch table, which checks CPU support
// before handing these out.

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cmath>
#include <cstddef>

namespace cyclemon::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double k_dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4),
                           acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double res = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) res += a[i] * b[i];
  return res;
}

double k_sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double res = hsum(acc);
  for (; i < n; ++i) res += x[i];
  return res;
}

void k_axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void k_scale(double alpha, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) x[i] *= alpha;
}

void k_relu_fwd(const double* x, double* y, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_max_pd(zero, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void k_relu_bwd(const double* x, const double* gy, double* gx, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    const __m256d pass = _mm256_and_pd(mask, _mm256_loadu_pd(gy + i));
    _mm256_storeu_pd(gx + i, _mm256_add_pd(_mm256_loadu_pd(gx + i), pass));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0) gx[i] += gy[i];
  }
}

inline double dot_row(const double* row, const double* x, std::size_t cols) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t c = 0;
  for (; c + 4 <= cols; c += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(row + c), _mm256_loadu_pd(x + c), acc);
  }
  double res = hsum(acc);
  for (; c < cols; ++c) res += row[c] * x[c];
  return res;
}

void k_matvec_acc(const double* a, std::size_t rows, std::size_t cols,
                  std::size_t lda, const double* x, double* y,
                  std::size_t incy) {
  std::size_t r = 0;
  // Two rows per pass keeps the x window hot and the FMA pipes busy.
  for (; r + 2 <= rows; r += 2) {
    const double* row0 = a + r * lda;
    const double* row1 = row0 + lda;
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      const __m256d vx = _mm256_loadu_pd(x + c);
      acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(row0 + c), vx, acc0);
      acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(row1 + c), vx, acc1);
    }
    double s0 = hsum(acc0);
    double s1 = hsum(acc1);
    for (; c < cols; ++c) {
      s0 += row0[c] * x[c];
      s1 += row1[c] * x[c];
    }
    y[r * incy] += s0;
    y[(r + 1) * incy] += s1;
  }
  for (; r < rows; ++r) {
    y[r * incy] += dot_row(a + r * lda, x, cols);
  }
}

void k_matvec_t_acc(const double* a, std::size_t rows, std::size_t cols,
                    std::size_t lda, const double* g, std::size_t incg,
                    double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = a + r * lda;
    const double gr = g[r * incg];
    const __m256d vg = _mm256_set1_pd(gr);
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      __m256d vy = _mm256_loadu_pd(y + c);
      vy = _mm256_fmadd_pd(vg, _mm256_loadu_pd(row + c), vy);
      _mm256_storeu_pd(y + c, vy);
    }
    for (; c < cols; ++c) y[c] += gr * row[c];
  }
}

void k_rank1_acc(const double* g, std::size_t rows, std::size_t incg,
                 const double* x, std::size_t cols, double* k,
                 std::size_t ldk) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* krow = k + r * ldk;
    const __m256d vg = _mm256_set1_pd(g[r * incg]);
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      __m256d vk = _mm256_loadu_pd(krow + c);
      vk = _mm256_fmadd_pd(vg, _mm256_loadu_pd(x + c), vk);
      _mm256_storeu_pd(krow + c, vk);
    }
    const double gr = g[r * incg];
    for (; c < cols; ++c) krow[c] += gr * x[c];
  }
}

void k_adam_step(double* p, const double* g, double* m, double* v,
                 std::size_t n, double lr, double b1, double b2, double eps,
                 double bc1, double bc2) {
  const __m256d vb1 = _mm256_set1_pd(b1);
  const __m256d vb1c = _mm256_set1_pd(1.0 - b1);
  const __m256d vb2 = _mm256_set1_pd(b2);
  const __m256d vb2c = _mm256_set1_pd(1.0 - b2);
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d vbc1 = _mm256_set1_pd(bc1);
  const __m256d vbc2 = _mm256_set1_pd(bc2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vg = _mm256_loadu_pd(g + i);
    __m256d vm = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    vm = _mm256_fmadd_pd(vb1, vm, _mm256_mul_pd(vb1c, vg));
    vv = _mm256_fmadd_pd(vb2, vv, _mm256_mul_pd(vb2c, _mm256_mul_pd(vg, vg)));
    _mm256_storeu_pd(m + i, vm);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_div_pd(vm, vbc1);
    const __m256d vhat = _mm256_div_pd(vv, vbc2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
    const __m256d upd = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), upd));
  }
  for (; i < n; ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

void k_central_sums(const double* x, std::size_t n, double mean, double* m2,
                    double* m3, double* m4) {
  const __m256d vmean = _mm256_set1_pd(mean);
  __m256d a2 = _mm256_setzero_pd();
  __m256d a3 = _mm256_setzero_pd();
  __m256d a4 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), vmean);
    const __m256d d2 = _mm256_mul_pd(d, d);
    a2 = _mm256_add_pd(a2, d2);
    a3 = _mm256_fmadd_pd(d2, d, a3);
    a4 = _mm256_fmadd_pd(d2, d2, a4);
  }
  double s2 = hsum(a2), s3 = hsum(a3), s4 = hsum(a4);
  for (; i < n; ++i) {
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

const Ops* avx2_ops() {
  static const Ops table = {
      "avx2",      k_dot,          k_sum,       k_axpy,
      k_scale,     k_relu_fwd,     k_relu_bwd,  k_matvec_acc,
      k_matvec_t_acc, k_rank1_acc, k_adam_step, k_central_sums,
  };
  return &table;
}

}  // namespace cyclemon::kernels

#else

namespace cyclemon::kernels {
const Ops* avx2_ops() { return nullptr; }
}  // namespace cyclemon::kernels

#endif
