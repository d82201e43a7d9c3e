// Reference kernels. Every SIMD backend is tested against these.

#include "lgvmpc/kernels.hpp"

#include <cmath>

namespace lgvmpc::simd {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x, const double* b, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    y[r] = dot(w + r * cols, x, cols) + (b ? b[r] : 0.0);
  }
}

void gemv_t_acc(const double* w, std::size_t rows, std::size_t cols, const double* d, double* out) {
  for (std::size_t r = 0; r < rows; ++r) axpy(d[r], w + r * cols, out, cols);
}

void leaky_relu(const double* pre, double* out, std::size_t n, double slope) {
  for (std::size_t i = 0; i < n; ++i) out[i] = pre[i] > 0.0 ? pre[i] : slope * pre[i];
}

void leaky_relu_backward(const double* pre, double* grad, std::size_t n, double slope) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!(pre[i] > 0.0)) grad[i] *= slope;
  }
}

void adam_step(double* param, const double* grad, double* m, double* v, std::size_t n, const AdamCoeffs& c) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grad[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * (grad[i] * grad[i]);
    param[i] -= c.lr * (m[i] * c.bias1) / (std::sqrt(v[i] * c.bias2) + c.eps);
  }
}

constexpr KernelTable kScalar{"scalar", dot, axpy, gemv, gemv_t_acc, leaky_relu, leaky_relu_backward, adam_step};

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

}  // namespace lgvmpc::simd
