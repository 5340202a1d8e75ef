// AVX2 variants of the inner-loop kernels. Same accumulation order as the
// scalar reference and explicit mul+add (no FMA), so results are
// bit-identical to the scalar path.

#include <immintrin.h>

#include <cstddef>

#include "pb/kernels.hpp"

namespace pb::kernels {

namespace {

void gemm_nn_acc_avx2(const double* a, const double* b, double* c, size_t m,
                      size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b + p * n;
      const __m256d va = _mm256_set1_pd(aip);
      size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        const __m256d vb = _mm256_loadu_pd(brow + j);
        const __m256d vc = _mm256_loadu_pd(crow + j);
        _mm256_storeu_pd(crow + j, _mm256_add_pd(vc, _mm256_mul_pd(va, vb)));
      }
      for (; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void add_avx2(const double* a, const double* b, double* dst, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) dst[i] = a[i] + b[i];
}

void mul_avx2(const double* a, const double* b, double* dst, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) dst[i] = a[i] * b[i];
}

void axpy_avx2(double alpha, const double* x, double* y, size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vy = _mm256_loadu_pd(y + i);
    const __m256d vx = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(y + i, _mm256_add_pd(vy, _mm256_mul_pd(va, vx)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_avx2(double alpha, double* x, size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

void relu_avx2(const double* src, double* dst, size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_max_pd(_mm256_loadu_pd(src + i), zero));
  for (; i < n; ++i) dst[i] = src[i] > 0.0 ? src[i] : 0.0;
}

void add_row_avx2(const double* src, const double* row, double* dst,
                  size_t rows, size_t cols) {
  for (size_t i = 0; i < rows; ++i)
    add_avx2(src + i * cols, row, dst + i * cols, cols);
}

void scale_cols_avx2(const double* src, const double* s, double* dst,
                     size_t rows, size_t cols) {
  for (size_t i = 0; i < rows; ++i)
    mul_avx2(src + i * cols, s, dst + i * cols, cols);
}

constexpr Kernels kAvx2 = {
    gemm_nn_acc_avx2, add_avx2,   mul_avx2,      axpy_avx2,
    scale_avx2,       relu_avx2,  add_row_avx2,  scale_cols_avx2,
};

}  // namespace

const Kernels& avx2_kernels() { return kAvx2; }

}  // namespace pb::kernels
