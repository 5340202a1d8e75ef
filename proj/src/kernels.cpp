#include "pb/kernels.hpp"

#include <algorithm>

#include "pb/errors.hpp"

namespace pb::kernels {

namespace {

void gemm_nn_acc_scalar(const double* a, const double* b, double* c, size_t m,
                        size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b + p * n;
      for (size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void add_scalar(const double* a, const double* b, double* dst, size_t n) {
  for (size_t i = 0; i < n; ++i) dst[i] = a[i] + b[i];
}

void mul_scalar(const double* a, const double* b, double* dst, size_t n) {
  for (size_t i = 0; i < n; ++i) dst[i] = a[i] * b[i];
}

void axpy_scalar(double alpha, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(double alpha, double* x, size_t n) {
  for (size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void relu_scalar(const double* src, double* dst, size_t n) {
  for (size_t i = 0; i < n; ++i) dst[i] = src[i] > 0.0 ? src[i] : 0.0;
}

void add_row_scalar(const double* src, const double* row, double* dst,
                    size_t rows, size_t cols) {
  for (size_t i = 0; i < rows; ++i)
    for (size_t j = 0; j < cols; ++j)
      dst[i * cols + j] = src[i * cols + j] + row[j];
}

void scale_cols_scalar(const double* src, const double* s, double* dst,
                       size_t rows, size_t cols) {
  for (size_t i = 0; i < rows; ++i)
    for (size_t j = 0; j < cols; ++j)
      dst[i * cols + j] = src[i * cols + j] * s[j];
}

constexpr Kernels kScalar = {
    gemm_nn_acc_scalar, add_scalar,     mul_scalar,      axpy_scalar,
    scale_scalar,       relu_scalar,    add_row_scalar,  scale_cols_scalar,
};

Backend detect_best() {
#if defined(PB_HAVE_AVX2_SOURCE)
  if (__builtin_cpu_supports("avx2")) return Backend::Avx2;
#endif
#if defined(PB_HAVE_NEON_SOURCE)
  return Backend::Neon;
#endif
  return Backend::Scalar;
}

const Kernels* g_active = nullptr;
Backend g_backend = Backend::Scalar;

}  // namespace

#if defined(PB_HAVE_AVX2_SOURCE)
const Kernels& avx2_kernels();  // kernels_avx2.cpp
#endif
#if defined(PB_HAVE_NEON_SOURCE)
const Kernels& neon_kernels();  // kernels_neon.cpp
#endif

const Kernels& scalar_kernels() { return kScalar; }

bool available(Backend backend) {
  switch (backend) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
#if defined(PB_HAVE_AVX2_SOURCE)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Backend::Neon:
#if defined(PB_HAVE_NEON_SOURCE)
      return true;
#else
      return false;
#endif
  }
  return false;
}

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
    case Backend::Neon:
      return "neon";
  }
  return "?";
}

void select(Backend backend) {
  if (!available(backend))
    throw config_error("kernel backend not available on this host: " +
                       std::string(backend_name(backend)));
  switch (backend) {
    case Backend::Scalar:
      g_active = &kScalar;
      break;
#if defined(PB_HAVE_AVX2_SOURCE)
    case Backend::Avx2:
      g_active = &avx2_kernels();
      break;
#endif
#if defined(PB_HAVE_NEON_SOURCE)
    case Backend::Neon:
      g_active = &neon_kernels();
      break;
#endif
    default:
      g_active = &kScalar;
      break;
  }
  g_backend = backend;
}

Backend selected() {
  if (!g_active) select(detect_best());
  return g_backend;
}

const Kernels& active() {
  if (!g_active) select(detect_best());
  return *g_active;
}

}  // namespace pb::kernels
