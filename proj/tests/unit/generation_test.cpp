#include <doctest.h>

#include "elm/common/error.hpp"
#include "elm/common/rng.hpp"
#include "elm/model/generation.hpp"

using namespace elm;
using namespace elm::model;

namespace {

struct Tiny {
    Tokenizer tok;
    DecoderModel model;
    AdapterParams adapter;
};

Tiny tiny() {
    const std::vector<std::string> corpus{"one two three four five", "one two three four five"};
    auto tok = Tokenizer::build(corpus, 120, 1);
    DecoderConfig c;
    c.vocab_size = tok.size();
    c.d_model = 8;
    c.n_layers = 1;
    c.n_heads = 2;
    c.d_ff = 16;
    c.max_seq_len = 64;
    Rng rng(8);
    DecoderModel m(c, rng);
    auto a = init_adapter(2, 4, 8, Activation::relu, rng);
    return {std::move(tok), std::move(m), std::move(a)};
}

}  // namespace

TEST_SUITE("generation") {
    TEST_CASE("penalty divides positive and multiplies negative seen logits") {
        const std::vector<double> logits{2.0, -2.0, 0.0, 4.0};
        const std::vector<int> ctx{0, 1, 2, 0};
        const auto out = apply_repetition_penalty(logits, ctx, 2.0);
        CHECK(out == std::vector<double>{1.0, -4.0, 0.0, 4.0});
        std::vector<double> in_place = logits;
        apply_repetition_penalty(in_place, std::vector<bool>{true, true, true, false}, 2.0);
        CHECK(in_place == out);
        CHECK(apply_repetition_penalty(logits, ctx, 1.0) == logits);
    }

    TEST_CASE("generation is reproducible per seed and bounded") {
        auto t = tiny();
        const auto p = make_prompt("one <z>", {embedding::normalize(embedding::EmbeddingVector({1.0, 1.0}))});
        GenerationConfig cfg;
        cfg.max_new_tokens = 12;
        cfg.seed = 5;
        const auto a = generate_ids(p, t.adapter, t.tok, t.model, cfg);
        const auto b = generate_ids(p, t.adapter, t.tok, t.model, cfg);
        CHECK(a.token_ids == b.token_ids);
        CHECK(a.text == b.text);
        CHECK(a.token_ids.size() <= 12);
        if (!a.hit_end) CHECK(a.token_ids.size() == 12);
        cfg.seed = 6;
        cfg.max_new_tokens = 40;
        const auto c = generate_ids(p, t.adapter, t.tok, t.model, cfg);
        const auto d = generate_ids(p, t.adapter, t.tok, t.model, GenerationConfig{1.0, 1.0, 40, 7});
        CHECK((c.token_ids != d.token_ids || c.token_ids.empty()));
    }

    TEST_CASE("generation stops at the context window") {
        auto t = tiny();
        const auto p = make_prompt("one <z>", {embedding::normalize(embedding::EmbeddingVector({1.0, 0.0}))});
        GenerationConfig cfg;
        cfg.max_new_tokens = 500;
        const auto r = generate_ids(p, t.adapter, t.tok, t.model, cfg);
        CHECK(r.token_ids.size() <= 64);
    }

    TEST_CASE("config validation") {
        GenerationConfig cfg;
        cfg.temperature = 0.0;
        CHECK_THROWS_AS(cfg.validate(), ValidationError);
        cfg = {};
        cfg.repetition_penalty = 0.0;
        CHECK_THROWS_AS(cfg.validate(), ValidationError);
        CHECK(parse_penalty_scope(penalty_scope_name(PenaltyScope::generated_only)) == PenaltyScope::generated_only);
    }
}
