#pragma once

#include <cstddef>
#include <string_view>

namespace pb::kernels {

// Data-parallel inner loops behind the tensor ops. Every entry point has a
// scalar reference implementation and (where the host supports it) a SIMD
// variant. All variants use the same accumulation order and no FMA
// contraction, so scalar and SIMD results are bit-identical; the
// equivalence tests assert exact equality.
struct Kernels {
  // c[m x n] += a[m x k] * b[k x n], row-major
  void (*gemm_nn_acc)(const double* a, const double* b, double* c, size_t m,
                      size_t k, size_t n);
  // dst[i] = a[i] + b[i]
  void (*add)(const double* a, const double* b, double* dst, size_t n);
  // dst[i] = a[i] * b[i]
  void (*mul)(const double* a, const double* b, double* dst, size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, size_t n);
  // x[i] *= alpha
  void (*scale)(double alpha, double* x, size_t n);
  // dst[i] = max(src[i], 0)
  void (*relu)(const double* src, double* dst, size_t n);
  // each row of src[rows x cols] += bias[cols]
  void (*add_row)(const double* src, const double* row, double* dst,
                  size_t rows, size_t cols);
  // each row of src[rows x cols] *= s[cols] elementwise
  void (*scale_cols)(const double* src, const double* s, double* dst,
                     size_t rows, size_t cols);
};

enum class Backend { Scalar, Avx2, Neon };

// Kernels for the best backend the host supports. Selected once at startup.
const Kernels& active();

// Force a specific backend (throws pb::config_error if unavailable).
// Used by the equivalence tests.
void select(Backend backend);
Backend selected();
bool available(Backend backend);
std::string_view backend_name(Backend backend);

const Kernels& scalar_kernels();

}  // namespace pb::kernels
