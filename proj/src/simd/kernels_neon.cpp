#include "elm/simd/kernels.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>

#include <cmath>

namespace elm::simd {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0), acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    double s = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double sum_squares_neon(const double* x, std::size_t n) { return dot_neon(x, x, n); }

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_neon(double* x, double alpha, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_n_f64(vld1q_f64(x + i), alpha));
    for (; i < n; ++i) x[i] *= alpha;
}

void matvec_neon(const double* w, const double* x, double* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = dot_neon(w + r * cols, x, cols);
}

void relu_neon(double* x, std::size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmaxq_f64(vld1q_f64(x + i), zero));
    for (; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void adamw_neon(double* p, const double* g, double* m, double* v, std::size_t n,
                const AdamWStep& s) {
    const double decay = 1.0 - s.lr * s.weight_decay;
    const double step = s.lr / s.bias_correction1;
    const double inv_sqrt_bc2 = 1.0 / std::sqrt(s.bias_correction2);
    for (std::size_t i = 0; i < n; ++i) {
        p[i] *= decay;
        m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
        v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
        const double denom = std::sqrt(v[i]) * inv_sqrt_bc2 + s.eps;
        p[i] -= step * m[i] / denom;
    }
}

}  // namespace

const KernelTable* neon_kernels() {
    static const KernelTable table{Isa::neon, dot_neon,    sum_squares_neon, axpy_neon,
                                   scale_neon, matvec_neon, relu_neon,        adamw_neon};
    return &table;
}

}  // namespace elm::simd

#else

namespace elm::simd {
const KernelTable* neon_kernels() { return nullptr; }
}  // namespace elm::simd

#endif
