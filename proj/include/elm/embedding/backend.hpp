#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "elm/common/error.hpp"
#include "elm/common/parallel.hpp"

namespace elm::embedding {

struct BackendConfig {
    std::string backend_id = "BAAI/bge-large-en-v1.5";
    // "http" for a remote service, "hashing" for the built-in local model
    std::string kind = "http";
    std::string endpoint = "http://127.0.0.1:8080/v1/embeddings";
    std::string model_path;
    std::string api_key_env;
    std::size_t dim = 1024;
    std::size_t max_tokens = 512;
    std::size_t batch_size = 32;
    std::size_t max_parallel = 4;
    int timeout_ms = 30000;
    RetryPolicy retry{};
};

class BackendError : public Error {
public:
    BackendError(const std::string& what, bool retryable) : Error(what), retryable_(retryable) {}
    bool retryable() const { return retryable_; }

private:
    bool retryable_;
};

// Strings to raw (unnormalized) vectors. Implementations must be safe to call
// from several threads at once.
class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual std::string id() const = 0;
    virtual std::size_t dim() const = 0;
    // Context limit in whitespace tokens; inputs are head-truncated to it.
    virtual std::size_t max_tokens() const = 0;
    virtual std::vector<std::vector<double>> embed_batch(std::span<const std::string> texts) = 0;
};

// Signed feature hashing of lowercase word unigrams and bigrams. Needs no
// model files; texts sharing vocabulary land close together.
class HashingBackend final : public EmbeddingBackend {
public:
    HashingBackend(std::size_t dim, std::size_t max_tokens = 512, std::string id = {});

    std::string id() const override { return id_; }
    std::size_t dim() const override { return dim_; }
    std::size_t max_tokens() const override { return max_tokens_; }
    std::vector<std::vector<double>> embed_batch(std::span<const std::string> texts) override;

    std::vector<double> embed_one(std::string_view text) const;

private:
    std::size_t dim_;
    std::size_t max_tokens_;
    std::string id_;
};

// OpenAI-style embeddings endpoint: POST {"model", "input": [...]} and read
// {"data": [{"index", "embedding"}]}. A bare JSON array of vectors (TEI
// style) is accepted as well.
class HttpBackend final : public EmbeddingBackend {
public:
    explicit HttpBackend(BackendConfig cfg);

    std::string id() const override { return cfg_.backend_id; }
    std::size_t dim() const override { return cfg_.dim; }
    std::size_t max_tokens() const override { return cfg_.max_tokens; }
    std::vector<std::vector<double>> embed_batch(std::span<const std::string> texts) override;

private:
    BackendConfig cfg_;
    std::string base_;
    std::string path_;
};

std::unique_ptr<EmbeddingBackend> make_backend(const BackendConfig& cfg);

}  // namespace elm::embedding
