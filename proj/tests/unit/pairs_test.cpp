#include <doctest.h>

#include <map>
#include <set>

#include "elm/common/error.hpp"
#include "elm/tasks/pairs.hpp"

using namespace elm;
using namespace elm::tasks;

namespace {

std::vector<TopicAssignment> topics(const std::vector<std::size_t>& sizes, std::size_t noise) {
    std::vector<TopicAssignment> out;
    for (std::size_t t = 0; t < sizes.size(); ++t)
        for (std::size_t i = 0; i < sizes[t]; ++i)
            out.push_back({"t" + std::to_string(t) + "_" + std::to_string(i), static_cast<int>(t), {}});
    for (std::size_t i = 0; i < noise; ++i) out.push_back({"noise" + std::to_string(i), -1, {}});
    return out;
}

}  // namespace

TEST_SUITE("pairs") {
    TEST_CASE("capacity counts unordered pairs without noise") {
        const auto a = topics({3, 4, 1}, 5);
        const auto c = pair_capacity(a);
        CHECK(c.same == 3 + 6 + 0);
        CHECK(c.different == 3 * 4 + 3 * 1 + 4 * 1);
    }

    TEST_CASE("sampler emits the exact split without repeats") {
        const auto a = topics({10, 12, 7}, 4);
        std::map<std::string, int> topic;
        for (const auto& x : a) topic[x.record_id] = x.topic_id;
        const auto pairs = sample_pairs(a, 40, 55, 3);
        REQUIRE(pairs.size() == 95);
        std::set<std::pair<std::string, std::string>> seen;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const auto& p = pairs[i];
            CHECK(p.same_topic == (i < 40));
            CHECK(p.id_a != p.id_b);
            CHECK(topic[p.id_a] >= 0);
            CHECK(topic[p.id_b] >= 0);
            CHECK((topic[p.id_a] == topic[p.id_b]) == p.same_topic);
            CHECK(seen.insert(std::minmax(p.id_a, p.id_b)).second);
        }
        const auto again = sample_pairs(a, 40, 55, 3);
        CHECK(again.front().id_a == pairs.front().id_a);
        CHECK(again.back().id_b == pairs.back().id_b);
    }

    TEST_CASE("sampler can exhaust the capacity exactly") {
        const auto a = topics({3, 2}, 0);
        const auto c = pair_capacity(a);
        const auto pairs = sample_pairs(a, c.same, c.different, 1);
        CHECK(pairs.size() == c.same + c.different);
        CHECK_THROWS_AS(sample_pairs(a, c.same + 1, 0, 1), ValidationError);
        CHECK_THROWS_AS(sample_pairs(a, 0, c.different + 1, 1), ValidationError);
    }

    TEST_CASE("interleave covers the largest task once and cycles smaller ones") {
        const std::map<TaskKind, std::size_t> sizes{{TaskKind::emb2abs, 3}, {TaskKind::emb2com, 7}};
        const auto s = interleave_schedule(sizes, 4);
        REQUIRE(s.size() == 14);
        std::map<TaskKind, std::vector<std::size_t>> per;
        for (std::size_t i = 0; i < s.size(); ++i) {
            CHECK(s[i].first == (i % 2 == 0 ? TaskKind::emb2abs : TaskKind::emb2com));
            per[s[i].first].push_back(s[i].second);
        }
        std::set<std::size_t> big(per[TaskKind::emb2com].begin(), per[TaskKind::emb2com].end());
        CHECK(big.size() == 7);
        // each full pass over the small task is a permutation
        for (std::size_t pass = 0; pass < 2; ++pass) {
            std::set<std::size_t> one(per[TaskKind::emb2abs].begin() + 3 * pass,
                                      per[TaskKind::emb2abs].begin() + 3 * pass + 3);
            CHECK(one.size() == 3);
        }
        CHECK_THROWS_AS(interleave_schedule({}, 1), ValidationError);
        CHECK_THROWS_AS(interleave_schedule({{TaskKind::emb2abs, 0}}, 1), ValidationError);
    }
}
