#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <numeric>
#include <set>
#include <stdexcept>

#include "elm/common/digest.hpp"
#include "elm/common/error.hpp"
#include "elm/common/parallel.hpp"
#include "elm/common/resources.hpp"
#include "elm/common/rng.hpp"
#include "elm/common/text.hpp"

using namespace elm;

TEST_SUITE("common") {
    TEST_CASE("sha256 known vectors") {
        CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
        CHECK(sha256_u64("abc") == 0xba7816bf8f01cfeaULL);
    }

    TEST_CASE("derived seeds are stable and label-specific") {
        CHECK(derive_seed(42, "a") == derive_seed(42, "a"));
        CHECK(derive_seed(42, "a") != derive_seed(42, "b"));
        CHECK(derive_seed(42, "a") != derive_seed(43, "a"));
    }

    TEST_CASE("rng draws stay in range and shuffle permutes") {
        Rng rng(5);
        for (int i = 0; i < 1000; ++i) {
            CHECK(rng.below(7) < 7);
            const double u = rng.uniform();
            CHECK((u >= 0.0 && u < 1.0));
        }
        std::vector<int> v(50);
        std::iota(v.begin(), v.end(), 0);
        auto w = v;
        rng.shuffle(std::span(w));
        CHECK(w != v);
        std::sort(w.begin(), w.end());
        CHECK(w == v);
        Rng a(9), b(9);
        for (int i = 0; i < 10; ++i) CHECK(a.normal() == b.normal());
    }

    TEST_CASE("normal draws have unit variance") {
        Rng rng(11);
        double s = 0, s2 = 0;
        const int n = 20000;
        for (int i = 0; i < n; ++i) {
            const double x = rng.normal();
            s += x;
            s2 += x * x;
        }
        CHECK(std::abs(s / n) < 0.05);
        CHECK(std::abs(s2 / n - 1.0) < 0.05);
    }

    TEST_CASE("parallel_for runs every index and reports failures in order") {
        std::vector<std::atomic<int>> hits(40);
        const auto failures = parallel_for(40, 3, [&](std::size_t i) {
            hits[i]++;
            if (i % 10 == 3) throw std::runtime_error("bad " + std::to_string(i));
        });
        for (auto& h : hits) CHECK(h.load() == 1);
        REQUIRE(failures.size() == 4);
        CHECK(failures[0].index == 3);
        CHECK(failures[3].index == 33);
    }

    TEST_CASE("with_retry retries transient errors only") {
        RetryPolicy p{2, 0};
        int calls = 0;
        const int v = with_retry(
            p,
            [&](int attempt) {
                ++calls;
                if (attempt < 2) throw std::runtime_error("flaky");
                return 7;
            },
            [](const std::exception&) { return true; });
        CHECK(v == 7);
        CHECK(calls == 3);
        calls = 0;
        CHECK_THROWS(with_retry(
            p, [&](int) -> int { ++calls; throw std::runtime_error("fatal"); },
            [](const std::exception&) { return false; }));
        CHECK(calls == 1);
    }

    TEST_CASE("text helpers") {
        CHECK(text::trim("  a b \n") == "a b");
        CHECK(text::lowercase("AbC") == "abc");
        CHECK(text::render("{a} and {b} and {c}", {{"a", "x"}, {"b", "y"}}) == "x and y and {c}");
        const auto spans = text::word_spans("Hello, world 42!");
        REQUIRE(spans.size() == 3);
        CHECK(spans[2] == "42");
        const auto t = text::truncate_head("one two three four", 2);
        CHECK(t.text == "one two");
        CHECK(t.truncated);
        CHECK_FALSE(text::truncate_head("one two", 5).truncated);
    }

    TEST_CASE("shipped resources are available") {
        CHECK_FALSE(resources::names().empty());
        CHECK_FALSE(resources::get("judge/discriminator.txt").empty());
    }

    TEST_CASE("validation errors are errors") {
        CHECK_THROWS_AS(throw ValidationError("x"), Error);
    }
}
