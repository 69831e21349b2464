#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace elm::embedding {

// A point in the external embedding space. Immutable once built; entries are
// always finite. `normalized()` is derived from the values, so it can never
// disagree with them.
class EmbeddingVector {
public:
    static constexpr double kUnitTolerance = 1e-6;

    EmbeddingVector() = default;
    explicit EmbeddingVector(std::vector<double> values);

    std::span<const double> values() const { return values_; }
    std::size_t dim() const { return values_.size(); }
    bool normalized() const { return normalized_; }
    double norm() const;
    double operator[](std::size_t i) const { return values_[i]; }

    bool operator==(const EmbeddingVector&) const = default;

private:
    std::vector<double> values_;
    bool normalized_ = false;
};

// a.b / (|a||b|). Throws ValidationError on dimension mismatch or a zero vector.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

EmbeddingVector normalize(const EmbeddingVector& v);

// normalize((a + b) / 2); throws when a + b vanishes.
EmbeddingVector interpolate_pair(const EmbeddingVector& a, const EmbeddingVector& b);

// Rounds every entry through float32, the on-disk precision.
EmbeddingVector to_storage_precision(const EmbeddingVector& v);

}  // namespace elm::embedding
