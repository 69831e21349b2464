#include <doctest.h>

#include <cmath>

#include "elm/common/error.hpp"
#include "elm/common/rng.hpp"
#include "elm/model/decoder.hpp"

using namespace elm;
using namespace elm::model;

namespace {

DecoderConfig tiny() {
    DecoderConfig c;
    c.vocab_size = 11;
    c.d_model = 8;
    c.n_layers = 2;
    c.n_heads = 2;
    c.d_ff = 16;
    c.max_seq_len = 16;
    return c;
}

Matrix random_inputs(std::size_t n, std::size_t d, Rng& rng) {
    Matrix m(n, d);
    for (auto& x : m.data) x = rng.normal();
    return m;
}

}  // namespace

TEST_SUITE("decoder") {
    TEST_CASE("incremental session reproduces the full forward pass") {
        Rng rng(1);
        DecoderModel m(tiny(), rng);
        LoraSpec spec;
        spec.rank = 2;
        m.add_lora(spec, rng);
        for (auto* p : m.lora_params())
            for (auto& v : p->value) v = 0.1 * rng.normal();
        const auto x = random_inputs(7, 8, rng);
        const auto full = m.forward_logits(x);
        DecoderModel::Session s(m);
        for (std::size_t t = 0; t < x.rows; ++t) {
            const auto logits = s.step(x.row(t));
            for (std::size_t v = 0; v < logits.size(); ++v) CHECK(logits[v] == doctest::Approx(full(t, v)).epsilon(1e-10));
        }
        CHECK(s.length() == 7);
    }

    TEST_CASE("fresh low-rank factors leave the function unchanged") {
        Rng rng(2);
        DecoderModel m(tiny(), rng);
        const auto x = random_inputs(5, 8, rng);
        const auto before = m.forward_logits(x);
        m.add_lora(LoraSpec{}, rng);
        CHECK(m.has_lora());
        CHECK(m.lora_params().size() == 2 * 2 * 2);  // 2 layers, query+key, A+B
        const auto after = m.forward_logits(x);
        CHECK(before.data == after.data);
    }

    TEST_CASE("teacher-forced loss gradients match finite differences") {
        Rng rng(3);
        DecoderModel m(tiny(), rng);
        m.add_lora(LoraSpec{2, 4.0, 0.0, {"query", "key"}, "none"}, rng);
        for (auto* p : m.lora_params())
            for (auto& v : p->value) v = 0.2 * rng.normal();
        m.set_trainable(true, true, true);
        auto x = random_inputs(6, 8, rng);
        const std::vector<int> labels{-1, 3, 4, -1, 9, 0};
        PassOptions opt;
        for (auto* p : m.dense_params()) p->zero_grad();
        for (auto* p : m.lora_params()) p->zero_grad();
        Matrix dx(6, 8);
        const auto r = m.forward_backward(x, labels, 1.0, opt, &dx);
        CHECK(r.count == 4);

        auto nll = [&]() { return m.forward_backward(x, labels, 0.0, opt).nll_sum; };
        const double h = 1e-6;
        auto fd = [&](double& slot) {
            const double keep = slot;
            slot = keep + h;
            const double up = nll();
            slot = keep - h;
            const double down = nll();
            slot = keep;
            return (up - down) / (2 * h);
        };
        std::vector<Param*> checked = m.dense_params();
        for (auto* p : m.lora_params()) checked.push_back(p);
        for (auto* p : checked) {
            CAPTURE(p->name);
            for (std::size_t i = 0; i < p->size(); i += 1 + p->size() / 5)
                CHECK(p->grad[i] == doctest::Approx(fd(p->value[i])).epsilon(1e-5));
        }
        for (std::size_t i = 0; i < x.data.size(); i += 7) CHECK(dx.data[i] == doctest::Approx(fd(x.data[i])).epsilon(1e-5));
    }

    TEST_CASE("frozen tensors accumulate nothing") {
        Rng rng(4);
        DecoderModel m(tiny(), rng);
        m.add_lora(LoraSpec{}, rng);
        m.set_trainable(false, true, false);
        for (auto* p : m.dense_params()) p->zero_grad();
        const auto x = random_inputs(4, 8, rng);
        const std::vector<int> labels{1, 2, 3, 4};
        m.forward_backward(x, labels, 1.0, PassOptions{});
        for (const auto* p : std::as_const(m).dense_params())
            for (double g : p->grad) CHECK(g == 0.0);
        double lora_grad = 0;
        for (const auto* p : std::as_const(m).lora_params())
            for (double g : p->grad) lora_grad += std::abs(g);
        CHECK(lora_grad > 0.0);
    }

    TEST_CASE("configuration is validated") {
        DecoderConfig c = tiny();
        c.n_heads = 3;
        CHECK_THROWS_AS(c.validate(), ValidationError);
        LoraSpec s;
        s.rank = 0;
        CHECK_THROWS_AS(s.validate(), ValidationError);
        s = LoraSpec{};
        s.target_projections = {"gate"};
        CHECK_THROWS_AS(s.validate(), ValidationError);
        CHECK(LoraSpec{}.scale() == 2.0);
    }

    TEST_CASE("embed_tokens copies rows of the token table") {
        Rng rng(5);
        DecoderModel m(tiny(), rng);
        const std::vector<int> ids{3, 0, 3};
        const auto e = m.embed_tokens(ids);
        CHECK(e.rows == 3);
        for (std::size_t j = 0; j < 8; ++j) {
            CHECK(e(0, j) == m.token_embedding().row(3)[j]);
            CHECK(e(2, j) == e(0, j));
        }
    }
}
