#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "elm/common/parallel.hpp"

namespace elm::llm {

struct ChatMessage {
    std::string role;  // system, user or assistant
    std::string content;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
};

ChatRequest user_request(std::string content, double temperature = 0.0);
ChatRequest system_user_request(std::string system, std::string user, double temperature = 0.0);

// Text-in, text-out chat model used as oracle, judge or extraction agent.
class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual std::string model_id() const = 0;
    virtual std::string complete(const ChatRequest& request) = 0;
};

// Thrown by clients; retryable marks transient transport/server errors.
class LlmError : public std::runtime_error {
public:
    LlmError(const std::string& what, bool retryable) : std::runtime_error(what), retryable_(retryable) {}
    bool retryable() const { return retryable_; }

private:
    bool retryable_;
};

struct ClientConfig {
    std::string kind = "http";  // http or rule
    std::string model_id = "gpt-4o";
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string api_key_env = "ORACLE_API_KEY";
    std::size_t max_parallel = 4;
    double requests_per_second = 0.0;  // 0 = unlimited
    int timeout_ms = 60000;
    RetryPolicy retry;
};

// OpenAI-compatible /chat/completions client.
class HttpChatClient : public LlmClient {
public:
    explicit HttpChatClient(ClientConfig cfg);
    std::string model_id() const override { return cfg_.model_id; }
    std::string complete(const ChatRequest& request) override;

private:
    ClientConfig cfg_;
    TokenBucket bucket_;
};

// Wraps a callable; used for stubs and the offline agents.
class FunctionClient : public LlmClient {
public:
    using Fn = std::function<std::string(const ChatRequest&)>;
    FunctionClient(std::string model_id, Fn fn) : id_(std::move(model_id)), fn_(std::move(fn)) {}
    std::string model_id() const override { return id_; }
    std::string complete(const ChatRequest& request) override { return fn_(request); }

private:
    std::string id_;
    Fn fn_;
};

// Deterministic offline stand-in that recognises the shipped prompt
// templates (PLS, commonalities, differences, discriminator, G-Eval judge,
// demographic extraction, counterfactual rewrite) and answers them with
// simple rules. Lets the full pipeline run without network access.
std::unique_ptr<LlmClient> make_rule_client(const std::string& model_id = "rule-based");

std::unique_ptr<LlmClient> make_client(const ClientConfig& cfg);

// Calls client.complete with retries on retryable errors; counts calls.
std::string complete_with_retry(LlmClient& client, const ChatRequest& request, const RetryPolicy& policy);

// Persistent response cache keyed by (template id, input digests, model id).
class ResponseCache {
public:
    // empty root keeps entries in memory only
    explicit ResponseCache(std::filesystem::path root);

    static std::string key(const std::string& template_id, const std::vector<std::string>& input_digests,
                           const std::string& model_id);

    std::optional<std::string> get(const std::string& key) const;
    void put(const std::string& key, const std::string& value);

private:
    std::filesystem::path entry_path(const std::string& key) const;

    std::filesystem::path root_;
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, std::string> memory_;
};

// Cache-first oracle call. Counts backend calls and cache hits.
class CachedOracle {
public:
    CachedOracle(LlmClient& client, ResponseCache& cache, RetryPolicy retry, std::size_t max_parallel = 4)
        : client_(client), cache_(cache), retry_(retry), max_parallel_(max_parallel) {}

    std::string ask(const std::string& template_id, const std::vector<std::string>& input_digests,
                    const ChatRequest& request);

    LlmClient& client() { return client_; }
    std::size_t max_parallel() const { return max_parallel_; }
    std::size_t calls() const { return calls_; }
    std::size_t hits() const { return hits_; }

private:
    LlmClient& client_;
    ResponseCache& cache_;
    RetryPolicy retry_;
    std::size_t max_parallel_;
    std::atomic<std::size_t> calls_{0};
    std::atomic<std::size_t> hits_{0};
};

}  // namespace elm::llm
