// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "elm/simd/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

#include <cmath>

namespace elm::simd {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double sum_squares_avx2(const double* x, std::size_t n) { return dot_avx2(x, x, n); }

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_avx2(double* x, double alpha, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), va));
    for (; i < n; ++i) x[i] *= alpha;
}

// Four output rows share each load of x.
void matvec_avx2(const double* w, const double* x, double* y, std::size_t rows, std::size_t cols) {
    std::size_t r = 0;
    for (; r + 4 <= rows; r += 4) {
        const double* w0 = w + r * cols;
        const double* w1 = w0 + cols;
        const double* w2 = w1 + cols;
        const double* w3 = w2 + cols;
        __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
        __m256d a2 = _mm256_setzero_pd(), a3 = _mm256_setzero_pd();
        std::size_t c = 0;
        for (; c + 4 <= cols; c += 4) {
            const __m256d vx = _mm256_loadu_pd(x + c);
            a0 = _mm256_fmadd_pd(_mm256_loadu_pd(w0 + c), vx, a0);
            a1 = _mm256_fmadd_pd(_mm256_loadu_pd(w1 + c), vx, a1);
            a2 = _mm256_fmadd_pd(_mm256_loadu_pd(w2 + c), vx, a2);
            a3 = _mm256_fmadd_pd(_mm256_loadu_pd(w3 + c), vx, a3);
        }
        double s0 = hsum(a0), s1 = hsum(a1), s2 = hsum(a2), s3 = hsum(a3);
        for (; c < cols; ++c) {
            s0 += w0[c] * x[c];
            s1 += w1[c] * x[c];
            s2 += w2[c] * x[c];
            s3 += w3[c] * x[c];
        }
        y[r] = s0;
        y[r + 1] = s1;
        y[r + 2] = s2;
        y[r + 3] = s3;
    }
    for (; r < rows; ++r) y[r] = dot_avx2(w + r * cols, x, cols);
}

void relu_avx2(double* x, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    for (; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void adamw_avx2(double* p, const double* g, double* m, double* v, std::size_t n,
                const AdamWStep& s) {
    const double decay = 1.0 - s.lr * s.weight_decay;
    const double step = s.lr / s.bias_correction1;
    const double inv_sqrt_bc2 = 1.0 / std::sqrt(s.bias_correction2);
    const __m256d vdecay = _mm256_set1_pd(decay);
    const __m256d vb1 = _mm256_set1_pd(s.beta1), vb1c = _mm256_set1_pd(1.0 - s.beta1);
    const __m256d vb2 = _mm256_set1_pd(s.beta2), vb2c = _mm256_set1_pd(1.0 - s.beta2);
    const __m256d vstep = _mm256_set1_pd(step);
    const __m256d vinv = _mm256_set1_pd(inv_sqrt_bc2);
    const __m256d veps = _mm256_set1_pd(s.eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vp = _mm256_mul_pd(_mm256_loadu_pd(p + i), vdecay);
        const __m256d vg = _mm256_loadu_pd(g + i);
        __m256d vm = _mm256_add_pd(_mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(vb1c, vg));
        __m256d vv = _mm256_add_pd(_mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)),
                                   _mm256_mul_pd(_mm256_mul_pd(vb2c, vg), vg));
        const __m256d denom = _mm256_add_pd(_mm256_mul_pd(_mm256_sqrt_pd(vv), vinv), veps);
        vp = _mm256_sub_pd(vp, _mm256_div_pd(_mm256_mul_pd(vstep, vm), denom));
        _mm256_storeu_pd(p + i, vp);
        _mm256_storeu_pd(m + i, vm);
        _mm256_storeu_pd(v + i, vv);
    }
    for (; i < n; ++i) {
        p[i] *= decay;
        m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
        v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
        const double denom = std::sqrt(v[i]) * inv_sqrt_bc2 + s.eps;
        p[i] -= step * m[i] / denom;
    }
}

}  // namespace

const KernelTable* avx2_kernels() {
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    static const KernelTable table{Isa::avx2, dot_avx2,    sum_squares_avx2, axpy_avx2,
                                   scale_avx2, matvec_avx2, relu_avx2,        adamw_avx2};
    return supported ? &table : nullptr;
}

}  // namespace elm::simd

#else

namespace elm::simd {
const KernelTable* avx2_kernels() { return nullptr; }
}  // namespace elm::simd

#endif
