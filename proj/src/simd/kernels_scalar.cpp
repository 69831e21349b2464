#include "elm/simd/kernels.hpp"

#include <cmath>

namespace elm::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double sum_squares_scalar(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
    return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(double* x, double alpha, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void matvec_scalar(const double* w, const double* x, double* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(w + r * cols, x, cols);
}

void relu_scalar(double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

// Same update order as torch.optim.AdamW: decay, moments, then the
// bias-corrected step.
void adamw_scalar(double* p, const double* g, double* m, double* v, std::size_t n,
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

const KernelTable& scalar_kernels() {
    static const KernelTable table{Isa::scalar,  dot_scalar,  sum_squares_scalar, axpy_scalar,
                                   scale_scalar, matvec_scalar, relu_scalar,      adamw_scalar};
    return table;
}

}  // namespace elm::simd
