#include <doctest.h>

#include <cmath>

#include "elm/common/error.hpp"
#include "elm/common/rng.hpp"
#include "elm/model/adapter.hpp"

using namespace elm;
using namespace elm::model;

TEST_SUITE("adapter") {
    TEST_CASE("forward computes W1 act(W0 z + b0) + b1") {
        auto p = make_adapter(2, 2, 1, Activation::relu);
        p.w0.value = {1, 0, 0, -1};  // hidden = (z0, -z1)
        p.b0.value = {0, 0.5};
        p.w1.value = {2, 3};
        p.b1.value = {1};
        Matrix z(2, 2);
        z(0, 0) = 1.0;
        z(0, 1) = 2.0;   // hidden (1, -1.5) -> (1, 0)
        z(1, 0) = -1.0;
        z(1, 1) = -1.0;  // hidden (-1, 1.5) -> (0, 1.5)
        const auto y = adapter_forward(z, p);
        REQUIRE(y.rows == 2);
        REQUIRE(y.cols == 1);
        CHECK(y(0, 0) == 3.0);
        CHECK(y(1, 0) == doctest::Approx(5.5));
    }

    TEST_CASE("gelu variant uses the tanh approximation") {
        auto p = make_adapter(1, 1, 1, Activation::gelu);
        p.w0.value = {1};
        p.w1.value = {1};
        Matrix z(1, 1);
        z(0, 0) = 1.0;
        CHECK(adapter_forward(z, p)(0, 0) == doctest::Approx(0.8411920).epsilon(1e-6));
    }

    TEST_CASE("init draws within the fan-in bound") {
        Rng rng(3);
        const auto p = init_adapter(16, 8, 4, Activation::relu, rng);
        CHECK(p.d_emb() == 16);
        CHECK(p.hidden() == 8);
        CHECK(p.d_base() == 4);
        for (double v : p.w0.value) CHECK(std::abs(v) <= 0.25);
        for (double v : p.w1.value) CHECK(std::abs(v) <= 1.0 / std::sqrt(8.0));
        CHECK_NOTHROW(p.validate());
    }

    TEST_CASE("validation and input checks") {
        auto p = make_adapter(3, 2, 2, Activation::relu);
        Matrix wrong(1, 4);
        CHECK_THROWS_AS(adapter_forward(wrong, p), ValidationError);
        p.b1.value[0] = INFINITY;
        CHECK_THROWS_AS(p.validate(), ValidationError);
        CHECK_THROWS_AS(make_adapter(0, 2, 2, Activation::relu), ValidationError);
        CHECK(parse_activation("gelu") == Activation::gelu);
        CHECK_THROWS_AS(parse_activation("tanh"), ValidationError);
    }

    TEST_CASE("frozen adapters accumulate no gradient") {
        Rng rng(4);
        auto p = init_adapter(3, 4, 2, Activation::relu, rng);
        p.set_trainable(false);
        Matrix z(1, 3, 0.5), d(1, 2, 1.0), dz(1, 3);
        AdapterCache cache;
        adapter_forward(z, p, &cache);
        adapter_backward(z, p, cache, d, &dz);
        for (auto* t : p.params())
            for (double g : t->grad) CHECK(g == 0.0);
        double total = 0;
        for (double g : dz.data) total += std::abs(g);
        CHECK(total > 0.0);
    }
}
