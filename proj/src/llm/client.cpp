#include "elm/llm/client.hpp"

#include <cstdlib>
#include <fstream>
#include <mutex>

#include <json.hpp>

#include "elm/common/digest.hpp"
#include "elm/common/error.hpp"
#include "elm/common/http.hpp"

namespace elm::llm {

namespace fs = std::filesystem;
using nlohmann::json;

ChatRequest user_request(std::string content, double temperature) {
    return ChatRequest{{ChatMessage{"user", std::move(content)}}, temperature};
}

ChatRequest system_user_request(std::string system, std::string user, double temperature) {
    return ChatRequest{{ChatMessage{"system", std::move(system)}, ChatMessage{"user", std::move(user)}}, temperature};
}

HttpChatClient::HttpChatClient(ClientConfig cfg)
    : cfg_(std::move(cfg)), bucket_(cfg_.requests_per_second, std::max(1.0, cfg_.requests_per_second)) {
    if (cfg_.endpoint.empty()) throw ValidationError("chat client '" + cfg_.model_id + "' has no endpoint");
}

std::string HttpChatClient::complete(const ChatRequest& request) {
    json body = {{"model", cfg_.model_id}, {"temperature", request.temperature}, {"messages", json::array()}};
    for (const auto& m : request.messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    std::vector<std::pair<std::string, std::string>> headers;
    if (!cfg_.api_key_env.empty())
        if (const char* key = std::getenv(cfg_.api_key_env.c_str()))
            headers.emplace_back("Authorization", std::string("Bearer ") + key);
    bucket_.acquire();
    const http::Response r = http::post_json(cfg_.endpoint, body.dump(), headers, cfg_.timeout_ms);
    if (r.status != 200) {
        const std::string why = r.status == 0 ? r.transport_error : "HTTP " + std::to_string(r.status);
        throw LlmError("chat request to " + cfg_.endpoint + " failed: " + why, http::is_transient(r));
    }
    try {
        const json parsed = json::parse(r.body);
        return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw LlmError(std::string("malformed chat response: ") + e.what(), false);
    }
}

std::unique_ptr<LlmClient> make_client(const ClientConfig& cfg) {
    if (cfg.kind == "http") return std::make_unique<HttpChatClient>(cfg);
    if (cfg.kind == "rule") return make_rule_client(cfg.model_id);
    throw ValidationError("unknown client kind '" + cfg.kind + "' (expected http or rule)");
}

std::string complete_with_retry(LlmClient& client, const ChatRequest& request, const RetryPolicy& policy) {
    return with_retry(
        policy, [&](int) { return client.complete(request); },
        [](const std::exception& e) {
            const auto* le = dynamic_cast<const LlmError*>(&e);
            return le && le->retryable();
        });
}

ResponseCache::ResponseCache(fs::path root) {
    if (!root.empty()) root_ = root / "oracle";
}

std::string ResponseCache::key(const std::string& template_id, const std::vector<std::string>& input_digests,
                               const std::string& model_id) {
    std::string joined = template_id + "\n" + model_id;
    for (const auto& d : input_digests) joined += "\n" + d;
    return sha256_hex(joined);
}

fs::path ResponseCache::entry_path(const std::string& key) const {
    return root_ / key.substr(0, 2) / (key + ".json");
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
    {
        std::shared_lock lock(mutex_);
        if (auto it = memory_.find(key); it != memory_.end()) return it->second;
    }
    if (root_.empty()) return std::nullopt;
    std::ifstream in(entry_path(key));
    if (!in) return std::nullopt;
    try {
        return json::parse(in).at("response").get<std::string>();
    } catch (const json::exception&) {
        return std::nullopt;
    }
}

void ResponseCache::put(const std::string& key, const std::string& value) {
    std::unique_lock lock(mutex_);
    memory_[key] = value;
    if (root_.empty()) return;
    const fs::path p = entry_path(key);
    fs::create_directories(p.parent_path());
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << json{{"response", value}}.dump();
    }
    fs::rename(tmp, p);
}

std::string CachedOracle::ask(const std::string& template_id, const std::vector<std::string>& input_digests,
                              const ChatRequest& request) {
    const std::string k = ResponseCache::key(template_id, input_digests, client_.model_id());
    if (auto hit = cache_.get(k)) {
        ++hits_;
        return *hit;
    }
    ++calls_;
    std::string out = complete_with_retry(client_, request, retry_);
    cache_.put(k, out);
    return out;
}

}  // namespace elm::llm
