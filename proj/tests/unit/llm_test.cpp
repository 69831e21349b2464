#include <doctest.h>

#include <json.hpp>

#include <atomic>
#include <filesystem>

#include "elm/common/error.hpp"
#include "elm/eval/judge.hpp"
#include "elm/llm/client.hpp"
#include "support/mock_server.hpp"
#include "support/synthetic.hpp"

using namespace elm;
using namespace elm::llm;

namespace {

std::string chat_reply(const std::string& content) {
    return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

}  // namespace

TEST_SUITE("llm") {
    TEST_CASE("http client sends the chat payload and reads the first choice") {
        nlohmann::json seen;
        std::string auth;
        testing::MockServer server("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
            seen = nlohmann::json::parse(req.body);
            auth = req.get_header_value("Authorization");
            res.set_content(chat_reply("hello"), "application/json");
        });
        ::setenv("ELM_TEST_KEY", "sk-test", 1);
        ClientConfig cfg;
        cfg.model_id = "judge-x";
        cfg.endpoint = server.url("/v1/chat/completions");
        cfg.api_key_env = "ELM_TEST_KEY";
        HttpChatClient client(cfg);
        CHECK(client.complete(system_user_request("sys", "usr", 0.5)) == "hello");
        CHECK(seen["model"] == "judge-x");
        CHECK(seen["temperature"] == 0.5);
        REQUIRE(seen["messages"].size() == 2);
        CHECK(seen["messages"][0]["role"] == "system");
        CHECK(seen["messages"][1]["content"] == "usr");
        CHECK(auth == "Bearer sk-test");
    }

    TEST_CASE("server errors are retried, client errors are not") {
        std::atomic<int> calls{0};
        testing::MockServer flaky("/c", [&](const httplib::Request&, httplib::Response& res) {
            if (++calls < 3) {
                res.status = 503;
                return;
            }
            res.set_content(chat_reply("ok"), "application/json");
        });
        ClientConfig cfg;
        cfg.endpoint = flaky.url("/c");
        HttpChatClient client(cfg);
        CHECK(complete_with_retry(client, user_request("x"), RetryPolicy{3, 1}) == "ok");
        CHECK(calls == 3);

        std::atomic<int> bad_calls{0};
        testing::MockServer bad("/c", [&](const httplib::Request&, httplib::Response& res) {
            ++bad_calls;
            res.status = 401;
        });
        cfg.endpoint = bad.url("/c");
        HttpChatClient unauthorized(cfg);
        CHECK_THROWS_AS(complete_with_retry(unauthorized, user_request("x"), RetryPolicy{3, 1}), LlmError);
        CHECK(bad_calls == 1);
    }

    TEST_CASE("malformed responses are non-retryable errors") {
        testing::MockServer server("/c", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("{\"nothing\":1}", "application/json");
        });
        ClientConfig cfg;
        cfg.endpoint = server.url("/c");
        HttpChatClient client(cfg);
        try {
            client.complete(user_request("x"));
            FAIL("expected an error");
        } catch (const LlmError& e) {
            CHECK_FALSE(e.retryable());
        }
    }

    TEST_CASE("response cache persists and the oracle counts hits") {
        const auto dir = testing::temp_dir("oracle_cache");
        std::atomic<int> calls{0};
        FunctionClient fn("m1", [&](const ChatRequest& r) {
            ++calls;
            return "echo:" + r.messages.back().content;
        });
        {
            ResponseCache cache(dir);
            CachedOracle oracle(fn, cache, RetryPolicy{0, 0}, 1);
            CHECK(oracle.ask("t@1", {"d1"}, user_request("a")) == "echo:a");
            CHECK(oracle.ask("t@1", {"d1"}, user_request("a")) == "echo:a");
            CHECK(oracle.calls() == 1);
            CHECK(oracle.hits() == 1);
        }
        ResponseCache reopened(dir);
        CachedOracle again(fn, reopened, RetryPolicy{0, 0}, 1);
        CHECK(again.ask("t@1", {"d1"}, user_request("ignored")) == "echo:a");
        CHECK(calls == 1);
        CHECK(ResponseCache::key("t@1", {"d1"}, "m1") != ResponseCache::key("t@1", {"d1"}, "m2"));
        CHECK(ResponseCache::key("t@1", {"d1"}, "m1") != ResponseCache::key("t@2", {"d1"}, "m1"));
        std::filesystem::remove_all(dir);
    }

    TEST_CASE("rule client answers the shipped templates") {
        auto rule = make_rule_client();
        const auto answer = rule->complete(user_request(eval::discriminator_prompt(
            "We randomized 120 adults to drug or placebo. The primary outcome improved.", "the the the the")));
        const auto parsed = eval::parse_discriminator_answer(answer);
        REQUIRE(parsed.has_value());
        CHECK(*parsed == 1);
        CHECK(make_client(ClientConfig{"rule", "r"})->model_id() == "r");
        CHECK_THROWS_AS(make_client(ClientConfig{"carrier-pigeon"}), ValidationError);
    }
}
