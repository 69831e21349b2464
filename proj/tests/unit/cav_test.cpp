#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "elm/cav/cav.hpp"
#include "elm/cav/svm.hpp"
#include "elm/common/error.hpp"
#include "elm/common/rng.hpp"
#include "elm/llm/client.hpp"
#include "support/synthetic.hpp"

using namespace elm;
using namespace elm::cav;
using embedding::EmbeddingVector;

namespace {

CavDataset toy_2d() {
    // separable by x = 0 with margin 1
    CavDataset d;
    d.concept_spec = default_concept("sex");
    const std::vector<std::pair<double, double>> pos{{1, 0}, {2, 1}, {1.5, -1}, {3, 0.5}};
    const std::vector<std::pair<double, double>> neg{{-1, 0}, {-2, -1}, {-1.5, 1}, {-3, 0.2}};
    int i = 0;
    for (auto [x, y] : pos) d.items.push_back({"p" + std::to_string(i++), EmbeddingVector({x, y}), true, Provenance::real, "t"});
    for (auto [x, y] : neg) d.items.push_back({"n" + std::to_string(i++), EmbeddingVector({x, y}), false, Provenance::real, "t"});
    return d;
}

std::shared_ptr<embedding::Embedder> hashing(std::size_t dim) {
    embedding::BackendConfig c;
    c.kind = "hashing";
    c.backend_id = "h";
    c.dim = dim;
    return embedding::make_embedder(c, {});
}

}  // namespace

TEST_SUITE("cav") {
    TEST_CASE("SMO finds the maximum-margin line") {
        const auto d = toy_2d();
        std::vector<std::vector<double>> x;
        std::vector<int> y;
        for (const auto& it : d.items) {
            x.emplace_back(it.embedding.values().begin(), it.embedding.values().end());
            y.push_back(it.positive ? 1 : -1);
        }
        SvmConfig cfg;
        cfg.C = 100.0;
        const auto svm = train_linear_svm(x, y, cfg);
        CHECK(svm.converged);
        CHECK(svm.w[0] == doctest::Approx(1.0).epsilon(1e-4));
        CHECK(svm.w[1] == doctest::Approx(0.0).epsilon(1e-4));
        CHECK(svm.b == doctest::Approx(0.0).epsilon(1e-4));
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] * svm.decision(x[i]) >= 1.0 - 1e-4);
    }

    TEST_CASE("fit_cav orients toward the positive class") {
        const auto c = fit_cav(toy_2d());
        CHECK(c.direction[0] > 0.99);
        CHECK(c.train_accuracy == 1.0);
        CHECK(c.n_positive == 4);
        CHECK(c.positive_class == "male");
        CHECK(c.margin == doctest::Approx(1.0 / std::sqrt(c.weights[0] * c.weights[0] + c.weights[1] * c.weights[1])));
        const auto z = embedding::normalize(EmbeddingVector({0.0, 1.0}));
        const auto moved = apply_cav(z, c, 1.0);
        CHECK(moved.normalized());
        CHECK(c.decision(moved.values()) > c.decision(z.values()));
        CHECK_THROWS_AS(apply_cav(EmbeddingVector({1.0, 0.0, 0.0}), c, 1.0), ValidationError);
        CHECK_THROWS_AS(apply_cav(embedding::normalize(EmbeddingVector({-1.0, 0.0})), c, 1.0), ValidationError);
    }

    TEST_CASE("dataset checks") {
        auto d = toy_2d();
        d.items.resize(5);  // 4 positive, 1 negative
        CHECK_THROWS_AS(d.validate(), ValidationError);
        auto e = toy_2d();
        e.items.pop_back();
        e.items.pop_back();
        CHECK_NOTHROW(e.validate(1.0));
        CHECK_THROWS_AS(e.validate(0.1), ValidationError);
        auto same = toy_2d();
        same.items[4].embedding = same.items[0].embedding;
        CHECK_THROWS_AS(fit_cav(same), ValidationError);
        CHECK_THROWS_AS(default_concept("height"), ValidationError);
        CHECK(default_concept("age").positive_class == "older adults");
    }

    TEST_CASE("concept vectors and datasets round-trip") {
        const auto dir = testing::temp_dir("cav_rt");
        const auto c = fit_cav(toy_2d());
        write_concept_vector(dir / "c.json", c);
        const auto back = read_concept_vector(dir / "c.json");
        CHECK(back.weights == c.weights);
        CHECK(back.bias == c.bias);
        CHECK(back.direction == c.direction);

        auto emb = hashing(16);
        CavDataset d;
        d.concept_spec = default_concept("sex");
        d.items.push_back({"a", {}, true, Provenance::real, "A trial in men."});
        d.items.push_back({"b", {}, false, Provenance::synthetic, "A trial in women."});
        write_cav_dataset(dir / "d.jsonl", d);
        const auto rd = read_cav_dataset(dir / "d.jsonl", d.concept_spec, *emb);
        REQUIRE(rd.items.size() == 2);
        CHECK(rd.items[1].provenance == Provenance::synthetic);
        CHECK_FALSE(rd.items[1].positive);
        CHECK(rd.items[0].embedding == emb->embed("A trial in men."));
        std::filesystem::remove_all(dir);
    }

    TEST_CASE("counterfactual augmentation flips labels") {
        auto rule = llm::make_rule_client();
        const std::vector<SeedAbstract> seeds{{"s1", "We randomized 80 men with gout.", true},
                                              {"s2", "We randomized 60 women with gout.", false}};
        auto emb = hashing(32);
        const auto d = build_augmented_dataset(seeds, default_concept("sex"), *rule, *emb, 1);
        REQUIRE(d.items.size() == 4);
        std::size_t synthetic = 0;
        for (const auto& it : d.items)
            if (it.provenance == Provenance::synthetic) {
                ++synthetic;
                CHECK(it.record_id.find("#cf") != std::string::npos);
            }
        CHECK(synthetic == 2);
        CHECK(d.count(true) == 2);
        const auto rewrite = augment_counterfactual("s1", seeds[0].text, default_concept("sex"), false, *rule, {});
        CHECK(rewrite.find("women") != std::string::npos);
    }

    TEST_CASE("alpha sweep shares the generation seed across the grid") {
        auto emb = hashing(32);
        const auto c = [&] {
            CavDataset d;
            d.concept_spec = default_concept("sex");
            for (int i = 0; i < 6; ++i) {
                const bool pos = i % 2 == 0;
                const std::string t = std::string(pos ? "men" : "women") + " study " + std::to_string(i);
                d.items.push_back({"r" + std::to_string(i), emb->embed(t), pos, Provenance::real, t});
            }
            return fit_cav(d);
        }();
        std::vector<std::uint64_t> seeds_seen;
        const eval::TextGenerator gen = [&](const model::MixedPrompt&, std::uint64_t seed) {
            seeds_seen.push_back(seed);
            return std::string("A trial in men.");
        };
        auto rule = llm::make_rule_client();
        SweepConfig cfg;
        cfg.alphas = {-1.0, 0.0, 1.0};
        const std::vector<SweepSeed> seeds{{"x", emb->embed("a study of men"), "a study of men"}};
        const auto r = sweep_alpha(seeds, c, cfg, gen, *rule, *emb);
        REQUIRE(r.summary.size() == 3);
        REQUIRE(seeds_seen.size() == 3);
        CHECK(seeds_seen[0] == seeds_seen[2]);
        for (const auto& s : r.summary) CHECK(s.counts.at("male") == 1);
        REQUIRE(r.reference.has_value());
        CHECK(r.plot().columns.size() == 3);
        cfg.alphas = {1.0, 0.0};
        CHECK_THROWS_AS(sweep_alpha(seeds, c, cfg, gen, *rule, *emb), ValidationError);
        CHECK(default_alpha_grid().size() == 11);
        CHECK(default_alpha_grid().front() == -1.25);
    }
}
