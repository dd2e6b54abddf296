#include "cyclemon/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>
#include <cstddef>

namespace cyclemon::kernels {
namespace {

double k_dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    acc = vfmaq_f64(acc, vld1q_f64(a + i), vld1q_f64(b + i));
  }
  double res = vaddvq_f64(acc);
  for (; i < n; ++i) res += a[i] * b[i];
  return res;
}

double k_sum(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
  double res = vaddvq_f64(acc);
  for (; i < n; ++i) res += x[i];
  return res;
}

void k_axpy(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void k_scale(double alpha, double* x, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_f64(va, vld1q_f64(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

void k_relu_fwd(const double* x, double* y, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vmaxq_f64(zero, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void k_relu_bwd(const double* x, const double* gy, double* gx, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const uint64x2_t mask = vcgtq_f64(vld1q_f64(x + i), zero);
    const float64x2_t pass = vreinterpretq_f64_u64(
        vandq_u64(mask, vreinterpretq_u64_f64(vld1q_f64(gy + i))));
    vst1q_f64(gx + i, vaddq_f64(vld1q_f64(gx + i), pass));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0) gx[i] += gy[i];
  }
}

void k_matvec_acc(const double* a, std::size_t rows, std::size_t cols,
                  std::size_t lda, const double* x, double* y,
                  std::size_t incy) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = a + r * lda;
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t c = 0;
    for (; c + 2 <= cols; c += 2) {
      acc = vfmaq_f64(acc, vld1q_f64(row + c), vld1q_f64(x + c));
    }
    double s = vaddvq_f64(acc);
    for (; c < cols; ++c) s += row[c] * x[c];
    y[r * incy] += s;
  }
}

void k_matvec_t_acc(const double* a, std::size_t rows, std::size_t cols,
                    std::size_t lda, const double* g, std::size_t incg,
                    double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = a + r * lda;
    const double gr = g[r * incg];
    const float64x2_t vg = vdupq_n_f64(gr);
    std::size_t c = 0;
    for (; c + 2 <= cols; c += 2) {
      vst1q_f64(y + c, vfmaq_f64(vld1q_f64(y + c), vg, vld1q_f64(row + c)));
    }
    for (; c < cols; ++c) y[c] += gr * row[c];
  }
}

void k_rank1_acc(const double* g, std::size_t rows, std::size_t incg,
                 const double* x, std::size_t cols, double* k,
                 std::size_t ldk) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* krow = k + r * ldk;
    const double gr = g[r * incg];
    const float64x2_t vg = vdupq_n_f64(gr);
    std::size_t c = 0;
    for (; c + 2 <= cols; c += 2) {
      vst1q_f64(krow + c, vfmaq_f64(vld1q_f64(krow + c), vg, vld1q_f64(x + c)));
    }
    for (; c < cols; ++c) krow[c] += gr * x[c];
  }
}

void k_adam_step(double* p, const double* g, double* m, double* v,
                 std::size_t n, double lr, double b1, double b2, double eps,
                 double bc1, double bc2) {
  const float64x2_t vb1 = vdupq_n_f64(b1);
  const float64x2_t vb1c = vdupq_n_f64(1.0 - b1);
  const float64x2_t vb2 = vdupq_n_f64(b2);
  const float64x2_t vb2c = vdupq_n_f64(1.0 - b2);
  const float64x2_t vlr = vdupq_n_f64(lr);
  const float64x2_t veps = vdupq_n_f64(eps);
  const float64x2_t vbc1 = vdupq_n_f64(bc1);
  const float64x2_t vbc2 = vdupq_n_f64(bc2);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t vg = vld1q_f64(g + i);
    float64x2_t vm = vld1q_f64(m + i);
    float64x2_t vv = vld1q_f64(v + i);
    vm = vfmaq_f64(vmulq_f64(vb1c, vg), vb1, vm);
    vv = vfmaq_f64(vmulq_f64(vb2c, vmulq_f64(vg, vg)), vb2, vv);
    vst1q_f64(m + i, vm);
    vst1q_f64(v + i, vv);
    const float64x2_t mhat = vdivq_f64(vm, vbc1);
    const float64x2_t vhat = vdivq_f64(vv, vbc2);
    const float64x2_t denom = vaddq_f64(vsqrtq_f64(vhat), veps);
    const float64x2_t upd = vdivq_f64(vmulq_f64(vlr, mhat), denom);
    vst1q_f64(p + i, vsubq_f64(vld1q_f64(p + i), upd));
  }
  for (; i < n; ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

void k_central_sums(const double* x, std::size_t n, double mean, double* m2,
                    double* m3, double* m4) {
  const float64x2_t vmean = vdupq_n_f64(mean);
  float64x2_t a2 = vdupq_n_f64(0.0);
  float64x2_t a3 = vdupq_n_f64(0.0);
  float64x2_t a4 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d = vsubq_f64(vld1q_f64(x + i), vmean);
    const float64x2_t d2 = vmulq_f64(d, d);
    a2 = vaddq_f64(a2, d2);
    a3 = vfmaq_f64(a3, d2, d);
    a4 = vfmaq_f64(a4, d2, d2);
  }
  double s2 = vaddvq_f64(a2), s3 = vaddvq_f64(a3), s4 = vaddvq_f64(a4);
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

const Ops* neon_ops() {
  static const Ops table = {
      "neon",      k_dot,          k_sum,       k_axpy,
      k_scale,     k_relu_fwd,     k_relu_bwd,  k_matvec_acc,
      k_matvec_t_acc, k_rank1_acc, k_adam_step, k_central_sums,
  };
  return &table;
}

}  // namespace cyclemon::kernels

#else

namespace cyclemon::kernels {
const Ops* neon_ops() { return nullptr; }
}  // namespace cyclemon::kernels

#endif
