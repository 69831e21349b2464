#include <doctest.h>

#include <cmath>
#include <vector>

#include "elm/common/rng.hpp"
#include "elm/simd/kernels.hpp"

using namespace elm;

namespace {

std::vector<const simd::KernelTable*> variants() {
    std::vector<const simd::KernelTable*> out;
    if (auto* t = simd::avx2_kernels()) out.push_back(t);
    if (auto* t = simd::neon_kernels()) out.push_back(t);
    return out;
}

std::vector<double> random_vec(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

bool close(double a, double b, double tol = 1e-12) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

bool close(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!close(a[i], b[i])) return false;
    return true;
}

}  // namespace

TEST_SUITE("simd") {
    TEST_CASE("scalar kernels match hand-written loops") {
        const auto& k = simd::scalar_kernels();
        std::vector<double> a{1, 2, 3}, b{4, -5, 6};
        CHECK(k.dot(a.data(), b.data(), 3) == 12.0);
        CHECK(k.sum_squares(a.data(), 3) == 14.0);
        k.axpy(2.0, a.data(), b.data(), 3);
        CHECK(b == std::vector<double>{6, -1, 12});
        k.scale(b.data(), 0.5, 3);
        CHECK(b == std::vector<double>{3, -0.5, 6});
        k.relu(b.data(), 3);
        CHECK(b == std::vector<double>{3, 0, 6});
        std::vector<double> w{1, 0, 2, 0, 1, -1}, y(2);
        k.matvec(w.data(), a.data(), y.data(), 2, 3);
        CHECK(y == std::vector<double>{7, -1});
    }

    TEST_CASE("adamw scalar step matches the update rule") {
        const auto& k = simd::scalar_kernels();
        std::vector<double> p{1.0}, g{0.5}, m{0.0}, v{0.0};
        simd::AdamWStep s;
        s.lr = 0.1;
        s.weight_decay = 0.01;
        s.bias_correction1 = 1 - s.beta1;
        s.bias_correction2 = 1 - s.beta2;
        k.adamw(p.data(), g.data(), m.data(), v.data(), 1, s);
        const double m1 = 0.1 * 0.5, v1 = 0.001 * 0.25;
        const double mh = m1 / s.bias_correction1, vh = v1 / s.bias_correction2;
        const double expect = 1.0 - 0.1 * 0.01 * 1.0 - 0.1 * mh / (std::sqrt(vh) + s.eps);
        CHECK(close(m[0], m1));
        CHECK(close(v[0], v1));
        CHECK(close(p[0], expect));
    }

    TEST_CASE("vector variants agree with the scalar reference") {
        Rng rng(1);
        const auto& ref = simd::scalar_kernels();
        for (const auto* t : variants()) {
            CAPTURE(simd::isa_name(t->isa));
            for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 15u, 16u, 17u, 33u, 100u}) {
                CAPTURE(n);
                auto a = random_vec(n, rng), b = random_vec(n, rng);
                CHECK(close(t->dot(a.data(), b.data(), n), ref.dot(a.data(), b.data(), n)));
                CHECK(close(t->sum_squares(a.data(), n), ref.sum_squares(a.data(), n)));

                auto y1 = b, y2 = b;
                t->axpy(0.7, a.data(), y1.data(), n);
                ref.axpy(0.7, a.data(), y2.data(), n);
                CHECK(close(y1, y2));

                auto s1 = a, s2 = a;
                t->scale(s1.data(), -1.3, n);
                ref.scale(s2.data(), -1.3, n);
                CHECK(close(s1, s2));

                auto r1 = a, r2 = a;
                t->relu(r1.data(), n);
                ref.relu(r2.data(), n);
                CHECK(r1 == r2);

                const std::size_t rows = 1 + n % 5;
                auto w = random_vec(rows * n, rng);
                std::vector<double> o1(rows), o2(rows);
                t->matvec(w.data(), a.data(), o1.data(), rows, n);
                ref.matvec(w.data(), a.data(), o2.data(), rows, n);
                CHECK(close(o1, o2));

                simd::AdamWStep st;
                st.lr = 0.01;
                st.weight_decay = 0.1;
                st.bias_correction1 = 0.19;
                st.bias_correction2 = 0.002;
                auto p1 = a, p2 = a, m1 = random_vec(n, rng), v1 = random_vec(n, rng);
                for (auto& x : v1) x = std::abs(x);
                auto m2 = m1, v2 = v1;
                t->adamw(p1.data(), b.data(), m1.data(), v1.data(), n, st);
                ref.adamw(p2.data(), b.data(), m2.data(), v2.data(), n, st);
                CHECK(close(p1, p2));
                CHECK(close(m1, m2));
                CHECK(close(v1, v2));
            }
        }
    }

    TEST_CASE("set_active switches the dispatch table") {
        const auto& before = simd::active();
        simd::set_active(simd::scalar_kernels());
        CHECK(simd::active().isa == simd::Isa::scalar);
        std::vector<double> a{3, 4};
        CHECK(simd::sum_squares(a) == 25.0);
        simd::set_active(before);
        CHECK(simd::isa_name(simd::Isa::scalar) == "scalar");
    }
}
