#include <doctest.h>

#include <cmath>
#include <map>

#include "elm/common/rng.hpp"
#include "elm/tasks/topics.hpp"

using namespace elm;
using namespace elm::tasks;

namespace {

// Two Gaussian clouds around orthogonal unit directions.
std::vector<embedding::EmbeddingVector> two_blobs(std::size_t per_blob, std::size_t dim, double noise,
                                                  std::uint64_t seed, std::vector<int>& truth) {
    Rng rng(seed);
    std::vector<embedding::EmbeddingVector> out;
    for (int b = 0; b < 2; ++b)
        for (std::size_t i = 0; i < per_blob; ++i) {
            std::vector<double> v(dim);
            for (auto& x : v) x = noise * rng.normal();
            v[static_cast<std::size_t>(b)] += 1.0;
            out.push_back(embedding::normalize(embedding::EmbeddingVector(v)));
            truth.push_back(b);
        }
    return out;
}

}  // namespace

TEST_SUITE("topics") {
    TEST_CASE("fit_ab matches the reference curve parameters for min_dist 0.1") {
        const auto [a, b] = fit_ab(1.0, 0.1);
        CHECK(a == doctest::Approx(1.577).epsilon(0.01));
        CHECK(b == doctest::Approx(0.895).epsilon(0.01));
    }

    TEST_CASE("two blobs give two pure clusters") {
        std::vector<int> truth;
        const auto emb = two_blobs(500, 16, 0.15, 7, truth);
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < emb.size(); ++i) ids.push_back("r" + std::to_string(i));
        UmapConfig cfg;
        const auto res = fit_topics(ids, emb, {}, cfg, {50});
        std::map<int, std::map<int, int>> table;
        for (std::size_t i = 0; i < emb.size(); ++i) ++table[res.assignments[i].topic_id][truth[i]];
        REQUIRE(res.grid.front().n_clusters == 2);
        int agree = 0;
        for (auto& [topic, counts] : table)
            if (topic >= 0) agree += std::max(counts[0], counts[1]);
        CHECK(static_cast<double>(agree) / emb.size() >= 0.95);
    }
}
