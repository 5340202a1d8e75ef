// NEON (aarch64) variants, float64x2. Same accumulation order as the scalar
// reference, explicit mul+add, bit-identical results.

#include <arm_neon.h>

#include <cstddef>

#include "pb/kernels.hpp"

namespace pb::kernels {

namespace {

void gemm_nn_acc_neon(const double* a, const double* b, double* c, size_t m,
                      size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b + p * n;
      const float64x2_t va = vdupq_n_f64(aip);
      size_t j = 0;
      for (; j + 2 <= n; j += 2) {
        const float64x2_t vb = vld1q_f64(brow + j);
        const float64x2_t vc = vld1q_f64(crow + j);
        vst1q_f64(crow + j, vaddq_f64(vc, vmulq_f64(va, vb)));
      }
      for (; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void add_neon(const double* a, const double* b, double* dst, size_t n) {
  size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(dst + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) dst[i] = a[i] + b[i];
}

void mul_neon(const double* a, const double* b, double* dst, size_t n) {
  size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(dst + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) dst[i] = a[i] * b[i];
}

void axpy_neon(double alpha, const double* x, double* y, size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t vy = vld1q_f64(y + i);
    const float64x2_t vx = vld1q_f64(x + i);
    vst1q_f64(y + i, vaddq_f64(vy, vmulq_f64(va, vx)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_neon(double alpha, double* x, size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(x + i, vmulq_f64(va, vld1q_f64(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

void relu_neon(const double* src, double* dst, size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(dst + i, vmaxq_f64(vld1q_f64(src + i), zero));
  for (; i < n; ++i) dst[i] = src[i] > 0.0 ? src[i] : 0.0;
}

void add_row_neon(const double* src, const double* row, double* dst,
                  size_t rows, size_t cols) {
  for (size_t i = 0; i < rows; ++i)
    add_neon(src + i * cols, row, dst + i * cols, cols);
}

void scale_cols_neon(const double* src, const double* s, double* dst,
                     size_t rows, size_t cols) {
  for (size_t i = 0; i < rows; ++i)
    mul_neon(src + i * cols, s, dst + i * cols, cols);
}

constexpr Kernels kNeon = {
    gemm_nn_acc_neon, add_neon,   mul_neon,      axpy_neon,
    scale_neon,       relu_neon,  add_row_neon,  scale_cols_neon,
};

}  // namespace

const Kernels& neon_kernels() { return kNeon; }

}  // namespace pb::kernels
