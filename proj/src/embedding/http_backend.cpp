#include <cstdlib>
#include <json.hpp>

#include "elm/common/http.hpp"
#include "elm/embedding/backend.hpp"

namespace elm::embedding {

using nlohmann::json;

HttpBackend::HttpBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.endpoint.empty()) throw ValidationError("embedding backend '" + cfg_.backend_id + "' has no endpoint");
    if (cfg_.dim == 0) throw ValidationError("embedding backend dim must be positive");
}

std::vector<std::vector<double>> HttpBackend::embed_batch(std::span<const std::string> texts) {
    json body = {{"model", cfg_.backend_id}, {"input", json::array()}};
    for (const auto& t : texts) body["input"].push_back(t);
    std::vector<std::pair<std::string, std::string>> headers;
    if (!cfg_.api_key_env.empty()) {
        if (const char* key = std::getenv(cfg_.api_key_env.c_str())) headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }
    const http::Response r = http::post_json(cfg_.endpoint, body.dump(), headers, cfg_.timeout_ms);
    if (r.status != 200) {
        const std::string why = r.status == 0 ? r.transport_error : "HTTP " + std::to_string(r.status);
        throw BackendError("embedding request to " + cfg_.endpoint + " failed: " + why, http::is_transient(r));
    }
    json parsed;
    try {
        parsed = json::parse(r.body);
    } catch (const json::exception& e) {
        throw BackendError(std::string("embedding response is not JSON: ") + e.what(), false);
    }
    std::vector<std::vector<double>> out(texts.size());
    auto take = [&](std::size_t idx, const json& vec) {
        if (idx >= out.size()) throw BackendError("embedding response index out of range", false);
        out[idx] = vec.get<std::vector<double>>();
        if (out[idx].size() != cfg_.dim)
            throw BackendError("embedding response has dim " + std::to_string(out[idx].size()) + ", expected " +
                                   std::to_string(cfg_.dim),
                               false);
    };
    if (parsed.is_array()) {
        if (parsed.size() != texts.size()) throw BackendError("embedding response has wrong length", false);
        for (std::size_t i = 0; i < parsed.size(); ++i) take(i, parsed[i]);
    } else if (parsed.contains("data")) {
        const auto& data = parsed["data"];
        if (data.size() != texts.size()) throw BackendError("embedding response has wrong length", false);
        for (std::size_t i = 0; i < data.size(); ++i) take(data[i].value("index", i), data[i].at("embedding"));
    } else {
        throw BackendError("embedding response has neither an array nor a data field", false);
    }
    return out;
}

std::unique_ptr<EmbeddingBackend> make_backend(const BackendConfig& cfg) {
    if (cfg.kind == "hashing") return std::make_unique<HashingBackend>(cfg.dim, cfg.max_tokens, cfg.backend_id);
    if (cfg.kind == "http") return std::make_unique<HttpBackend>(cfg);
    throw ValidationError("unknown embedding backend kind '" + cfg.kind + "' (expected http or hashing)");
}

}  // namespace elm::embedding
