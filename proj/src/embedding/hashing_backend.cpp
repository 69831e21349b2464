#include <cmath>
#include <cstdint>

#include "elm/common/text.hpp"
#include "elm/embedding/backend.hpp"

namespace elm::embedding {

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t mix(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ULL;
    x ^= x >> 33;
    return x;
}

void add_feature(std::vector<double>& v, std::uint64_t h, double weight) {
    h = mix(h);
    const std::size_t idx = static_cast<std::size_t>(h % v.size());
    v[idx] += ((h >> 63) != 0U) ? -weight : weight;
}

}  // namespace

HashingBackend::HashingBackend(std::size_t dim, std::size_t max_tokens, std::string id)
    : dim_(dim), max_tokens_(max_tokens), id_(id.empty() ? "hashing-" + std::to_string(dim) : std::move(id)) {
    if (dim_ == 0) throw ValidationError("hashing backend needs dim > 0");
}

std::vector<double> HashingBackend::embed_one(std::string_view raw) const {
    const std::string lowered = text::lowercase(raw);
    const auto words = text::word_spans(lowered);
    std::vector<double> v(dim_, 0.0);
    if (words.empty()) {
        add_feature(v, fnv1a("<empty>"), 1.0);
        return v;
    }
    for (std::size_t i = 0; i < words.size(); ++i) {
        const std::uint64_t h = fnv1a(words[i]);
        add_feature(v, h, 1.0);
        if (i + 1 < words.size()) add_feature(v, fnv1a(words[i + 1], h ^ 0x9e3779b97f4a7c15ULL), 0.5);
    }
    return v;
}

std::vector<std::vector<double>> HashingBackend::embed_batch(std::span<const std::string> texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
}

}  // namespace elm::embedding
