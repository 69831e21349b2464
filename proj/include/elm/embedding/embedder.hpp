#pragma once

#include <atomic>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "elm/embedding/backend.hpp"
#include "elm/embedding/cache.hpp"
#include "elm/embedding/vector.hpp"

namespace elm::embedding {

struct EmbedOptions {
    std::size_t batch_size = 32;
    std::size_t max_parallel = 4;
    RetryPolicy retry{};
};

// Raised when some inputs could not be embedded after retries.
class EmbedFailure : public Error {
public:
    EmbedFailure(const std::string& what, std::vector<std::size_t> failed, int attempts)
        : Error(what), failed_indices(std::move(failed)), attempts(attempts) {}
    std::vector<std::size_t> failed_indices;
    int attempts;
};

struct EmbedStats {
    std::size_t backend_calls = 0;
    std::size_t cache_hits = 0;
    std::size_t truncated = 0;
};

// Backend + cache + batching policy. Returned vectors are unit-norm and
// rounded to float32 so a cold computation and a cache read agree exactly.
class Embedder {
public:
    Embedder(std::shared_ptr<EmbeddingBackend> backend, std::shared_ptr<EmbeddingCache> cache,
             EmbedOptions options = {});

    std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts);
    EmbeddingVector embed(const std::string& text);

    std::size_t dim() const { return backend_->dim(); }
    std::string backend_id() const { return backend_->id(); }
    EmbedStats stats() const;

private:
    std::shared_ptr<EmbeddingBackend> backend_;
    std::shared_ptr<EmbeddingCache> cache_;
    EmbedOptions options_;
    std::atomic<std::size_t> backend_calls_{0};
    std::atomic<std::size_t> cache_hits_{0};
    std::atomic<std::size_t> truncated_{0};
};

// Builds backend + cache from a config block; cache_root may be empty.
std::shared_ptr<Embedder> make_embedder(const BackendConfig& cfg, const std::filesystem::path& cache_root);

// Content key used for caches and embedding references.
std::string text_digest(const std::string& text);

// Cosine between embed(generated_text) and target.
double semantic_consistency(const std::string& generated_text, const EmbeddingVector& target, Embedder& embedder);

}  // namespace elm::embedding
