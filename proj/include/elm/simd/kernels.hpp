#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Data-parallel inner loops used by the adapter, the decoder model, the
// optimizer and the embedding geometry. Every kernel has a scalar reference
// implementation; vectorized variants (AVX2+FMA on x86-64, NEON on aarch64)
// are selected at runtime and must agree with the reference up to rounding.

namespace elm::simd {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);

struct AdamWStep {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    // 1 - beta^t, precomputed by the caller
    double bias_correction1 = 1.0;
    double bias_correction2 = 1.0;
};

// Raw function table. Lengths are element counts; pointers may alias only
// where noted.
struct KernelTable {
    Isa isa;
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sum_squares)(const double* x, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // x *= alpha
    void (*scale)(double* x, double alpha, std::size_t n);
    // y[r] = dot(w[r, :], x) for r in [0, rows); w is row-major rows x cols
    void (*matvec)(const double* w, const double* x, double* y, std::size_t rows, std::size_t cols);
    // x[i] = max(x[i], 0)
    void (*relu)(double* x, std::size_t n);
    void (*adamw)(double* param, const double* grad, double* m, double* v, std::size_t n,
                  const AdamWStep& step);
};

const KernelTable& scalar_kernels();
// nullptr when the variant is not compiled in or the CPU lacks support
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

// Best available table, chosen once. ELM_SIMD=scalar|avx2|neon overrides.
const KernelTable& active();
// Replace the active table (tests and benchmarks).
void set_active(const KernelTable& table);

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active().dot(a.data(), b.data(), a.size());
}
inline double sum_squares(std::span<const double> x) {
    return active().sum_squares(x.data(), x.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    active().axpy(alpha, x.data(), y.data(), x.size());
}
inline void scale(std::span<double> x, double alpha) { active().scale(x.data(), alpha, x.size()); }
inline void relu(std::span<double> x) { active().relu(x.data(), x.size()); }

}  // namespace elm::simd
