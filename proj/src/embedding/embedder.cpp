#include "elm/embedding/embedder.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "elm/common/digest.hpp"
#include "elm/common/text.hpp"

namespace elm::embedding {

std::string text_digest(const std::string& text) { return sha256_hex(text); }

Embedder::Embedder(std::shared_ptr<EmbeddingBackend> backend, std::shared_ptr<EmbeddingCache> cache,
                   EmbedOptions options)
    : backend_(std::move(backend)), cache_(std::move(cache)), options_(options) {
    if (!backend_) throw ValidationError("embedder needs a backend");
    if (!cache_) cache_ = std::make_shared<EmbeddingCache>(std::filesystem::path{}, backend_->id(), backend_->dim());
    if (cache_->backend_id() != backend_->id()) throw ValidationError("embedding cache belongs to another backend");
    options_.batch_size = std::max<std::size_t>(1, options_.batch_size);
}

EmbedStats Embedder::stats() const { return {backend_calls_.load(), cache_hits_.load(), truncated_.load()}; }

std::vector<EmbeddingVector> Embedder::embed_texts(std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<std::string> digests(texts.size());
    // digest -> input indices still waiting for a vector
    std::map<std::string, std::vector<std::size_t>> pending;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        digests[i] = text_digest(texts[i]);
        if (auto hit = cache_->get(digests[i])) {
            out[i] = EmbeddingVector(std::move(*hit));
            ++cache_hits_;
        } else {
            pending[digests[i]].push_back(i);
        }
    }
    if (pending.empty()) return out;

    std::vector<const std::string*> miss_digests;
    std::vector<std::string> miss_texts;
    for (const auto& [digest, idxs] : pending) {
        miss_digests.push_back(&digest);
        auto cut = text::truncate_head(texts[idxs.front()], backend_->max_tokens());
        if (cut.truncated) ++truncated_;
        miss_texts.push_back(std::move(cut.text));
    }

    const std::size_t bs = options_.batch_size;
    const std::size_t n_batches = (miss_texts.size() + bs - 1) / bs;
    std::vector<int> attempts(n_batches, 0);
    auto failures = parallel_for(n_batches, options_.max_parallel, [&](std::size_t b) {
        const std::size_t lo = b * bs;
        const std::size_t hi = std::min(miss_texts.size(), lo + bs);
        std::span<const std::string> batch(miss_texts.data() + lo, hi - lo);
        auto raw = with_retry(
            options_.retry,
            [&](int attempt) {
                attempts[b] = attempt + 1;
                ++backend_calls_;
                return backend_->embed_batch(batch);
            },
            [](const std::exception& e) {
                const auto* be = dynamic_cast<const BackendError*>(&e);
                return be != nullptr && be->retryable();
            });
        if (raw.size() != batch.size()) throw BackendError("backend returned the wrong number of vectors", false);
        for (std::size_t k = 0; k < raw.size(); ++k) {
            const EmbeddingVector v = to_storage_precision(normalize(EmbeddingVector(std::move(raw[k]))));
            cache_->put(*miss_digests[lo + k], std::vector<double>(v.values().begin(), v.values().end()));
        }
    });

    if (!failures.empty()) {
        std::vector<std::size_t> failed;
        std::string first_error;
        int max_attempts = 0;
        for (const auto& f : failures) {
            const std::size_t lo = f.index * bs;
            const std::size_t hi = std::min(miss_texts.size(), lo + bs);
            for (std::size_t k = lo; k < hi; ++k)
                for (std::size_t idx : pending.at(*miss_digests[k])) failed.push_back(idx);
            max_attempts = std::max(max_attempts, attempts[f.index]);
            if (first_error.empty()) {
                try {
                    std::rethrow_exception(f.error);
                } catch (const std::exception& e) {
                    first_error = e.what();
                }
            }
        }
        std::sort(failed.begin(), failed.end());
        std::ostringstream msg;
        msg << "embedding failed for " << failed.size() << " input(s) after " << max_attempts
            << " attempt(s); indices:";
        for (std::size_t i = 0; i < failed.size() && i < 32; ++i) msg << ' ' << failed[i];
        if (failed.size() > 32) msg << " ...";
        msg << "; first error: " << first_error;
        throw EmbedFailure(msg.str(), std::move(failed), max_attempts);
    }

    for (const auto& [digest, idxs] : pending) {
        auto v = cache_->get(digest);
        if (!v) throw Error("embedding cache lost entry " + digest);
        EmbeddingVector ev(std::move(*v));
        for (std::size_t idx : idxs) out[idx] = ev;
    }
    return out;
}

EmbeddingVector Embedder::embed(const std::string& text) {
    std::vector<std::string> one{text};
    return embed_texts(one).front();
}

std::shared_ptr<Embedder> make_embedder(const BackendConfig& cfg, const std::filesystem::path& cache_root) {
    std::shared_ptr<EmbeddingBackend> backend = make_backend(cfg);
    auto cache = std::make_shared<EmbeddingCache>(cache_root, backend->id(), backend->dim());
    return std::make_shared<Embedder>(std::move(backend), std::move(cache),
                                      EmbedOptions{cfg.batch_size, cfg.max_parallel, cfg.retry});
}

double semantic_consistency(const std::string& generated_text, const EmbeddingVector& target, Embedder& embedder) {
    if (generated_text.empty()) throw ValidationError("semantic_consistency: generated text is empty");
    if (target.dim() != embedder.dim()) throw ValidationError("semantic_consistency: target dim does not match embedder");
    return cosine_similarity(embedder.embed(generated_text), target);
}

}  // namespace elm::embedding
