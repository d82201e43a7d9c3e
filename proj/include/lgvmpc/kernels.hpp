#pragma once

// Dense double-precision kernels used by the network forward/backward passes
// and the optimizer. Each backend fills the same table; the active table is
// chosen once per process from CPU features, or forced with the environment
// variable LGVMPC_SIMD=scalar|avx2|neon.

#include <cstddef>

namespace lgvmpc::simd {

struct AdamCoeffs {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double bias1;  // 1 / (1 - beta1^t)
  double bias2;  // 1 / (1 - beta2^t)
};

struct KernelTable {
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y = W x + b, W row-major rows x cols; b may be null.
  void (*gemv)(const double* w, std::size_t rows, std::size_t cols, const double* x, const double* b, double* y);
  // out += W' d, W row-major rows x cols.
  void (*gemv_t_acc)(const double* w, std::size_t rows, std::size_t cols, const double* d, double* out);
  void (*leaky_relu)(const double* pre, double* out, std::size_t n, double slope);
  // grad[i] *= (pre[i] > 0 ? 1 : slope)
  void (*leaky_relu_backward)(const double* pre, double* grad, std::size_t n, double slope);
  void (*adam_step)(double* param, const double* grad, double* m, double* v, std::size_t n, const AdamCoeffs& c);
};

const KernelTable& scalar_kernels();

// Null when the backend is not compiled in or the CPU lacks the features.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

const KernelTable& active_kernels();

}  // namespace lgvmpc::simd
