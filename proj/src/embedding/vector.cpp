#include "elm/embedding/vector.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "elm/common/error.hpp"
#include "elm/simd/kernels.hpp"

namespace elm::embedding {

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw ValidationError("embedding vector must have positive dimension");
    for (std::size_t i = 0; i < values_.size(); ++i)
        if (!std::isfinite(values_[i]))
            throw ValidationError("embedding vector entry " + std::to_string(i) + " is not finite");
    normalized_ = std::abs(norm() - 1.0) <= kUnitTolerance;
}

double EmbeddingVector::norm() const { return std::sqrt(simd::sum_squares(values_)); }

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim())
        throw ValidationError("cosine_similarity: dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                              std::to_string(b.dim()) + ")");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) throw ValidationError("cosine_similarity: zero-norm input");
    const double c = simd::dot(a.values(), b.values()) / (na * nb);
    return std::clamp(c, -1.0, 1.0);
}

EmbeddingVector normalize(const EmbeddingVector& v) {
    const double n = v.norm();
    if (n == 0.0 || !std::isfinite(n)) throw ValidationError("normalize: zero vector");
    std::vector<double> out(v.values().begin(), v.values().end());
    simd::scale(out, 1.0 / n);
    return EmbeddingVector(std::move(out));
}

EmbeddingVector interpolate_pair(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) throw ValidationError("interpolate_pair: dimension mismatch");
    std::vector<double> mid(a.values().begin(), a.values().end());
    simd::axpy(1.0, b.values(), mid);
    simd::scale(mid, 0.5);
    if (simd::sum_squares(mid) == 0.0) throw ValidationError("interpolate_pair: antipodal inputs have no midpoint direction");
    return normalize(EmbeddingVector(std::move(mid)));
}

EmbeddingVector to_storage_precision(const EmbeddingVector& v) {
    std::vector<double> out(v.dim());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(static_cast<float>(v[i]));
    return EmbeddingVector(std::move(out));
}

}  // namespace elm::embedding
