// AArch64 NEON kernels (2 doubles per register). Advanced SIMD is mandatory
// on AArch64, so no runtime feature probe is needed.

#include "lgvmpc/kernels.hpp"

#if defined(__aarch64__) && defined(__ARM_NEON)

#include <arm_neon.h>

#include <cmath>

namespace lgvmpc::simd {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0), acc1 = vdupq_n_f64(0.0);
  float64x2_t acc2 = vdupq_n_f64(0.0), acc3 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    acc2 = vfmaq_f64(acc2, vld1q_f64(a + i + 4), vld1q_f64(b + i + 4));
    acc3 = vfmaq_f64(acc3, vld1q_f64(a + i + 6), vld1q_f64(b + i + 6));
  }
  for (; i + 2 <= n; i += 2) acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
  double s = vaddvq_f64(vaddq_f64(vaddq_f64(acc0, acc1), vaddq_f64(acc2, acc3)));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x, const double* b, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot(w + r * cols, x, cols) + (b ? b[r] : 0.0);
}

void gemv_t_acc(const double* w, std::size_t rows, std::size_t cols, const double* d, double* out) {
  for (std::size_t r = 0; r < rows; ++r) axpy(d[r], w + r * cols, out, cols);
}

void leaky_relu(const double* pre, double* out, std::size_t n, double slope) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t p = vld1q_f64(pre + i);
    vst1q_f64(out + i, vbslq_f64(vcgtq_f64(p, zero), p, vmulq_n_f64(p, slope)));
  }
  for (; i < n; ++i) out[i] = pre[i] > 0.0 ? pre[i] : slope * pre[i];
}

void leaky_relu_backward(const double* pre, double* grad, std::size_t n, double slope) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  const float64x2_t one = vdupq_n_f64(1.0);
  const float64x2_t vs = vdupq_n_f64(slope);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const uint64x2_t pos = vcgtq_f64(vld1q_f64(pre + i), zero);
    vst1q_f64(grad + i, vmulq_f64(vld1q_f64(grad + i), vbslq_f64(pos, one, vs)));
  }
  for (; i < n; ++i) {
    if (!(pre[i] > 0.0)) grad[i] *= slope;
  }
}

void adam_step(double* param, const double* grad, double* m, double* v, std::size_t n, const AdamCoeffs& c) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t g = vld1q_f64(grad + i);
    const float64x2_t mi = vaddq_f64(vmulq_n_f64(vld1q_f64(m + i), c.beta1), vmulq_n_f64(g, 1.0 - c.beta1));
    const float64x2_t vi =
        vaddq_f64(vmulq_n_f64(vld1q_f64(v + i), c.beta2), vmulq_n_f64(vmulq_f64(g, g), 1.0 - c.beta2));
    vst1q_f64(m + i, mi);
    vst1q_f64(v + i, vi);
    const float64x2_t denom = vaddq_f64(vsqrtq_f64(vmulq_n_f64(vi, c.bias2)), vdupq_n_f64(c.eps));
    const float64x2_t upd = vdivq_f64(vmulq_n_f64(vmulq_n_f64(mi, c.bias1), c.lr), denom);
    vst1q_f64(param + i, vsubq_f64(vld1q_f64(param + i), upd));
  }
  for (; i < n; ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grad[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * (grad[i] * grad[i]);
    param[i] -= c.lr * (m[i] * c.bias1) / (std::sqrt(v[i] * c.bias2) + c.eps);
  }
}

constexpr KernelTable kNeon{"neon", dot, axpy, gemv, gemv_t_acc, leaky_relu, leaky_relu_backward, adam_step};

}  // namespace

const KernelTable* neon_kernels() { return &kNeon; }

}  // namespace lgvmpc::simd

#else

namespace lgvmpc::simd {
const KernelTable* neon_kernels() { return nullptr; }
}  // namespace lgvmpc::simd

#endif
