#include "elm/model/tensor.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>

#include "elm/common/digest.hpp"
#include "elm/common/error.hpp"
#include "elm/simd/kernels.hpp"

namespace elm::model {

Param::Param(std::string n, std::vector<std::size_t> s) : name(std::move(n)), shape(std::move(s)) {
    const std::size_t count = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    value.assign(count, 0.0);
    grad.assign(count, 0.0);
}

void Param::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

Matrix linear(const Matrix& x, const Param& w) {
    if (x.cols != w.cols()) throw Error("linear: input width " + std::to_string(x.cols) + " does not match " + w.name);
    Matrix y(x.rows, w.rows());
    const auto& k = simd::active();
    for (std::size_t t = 0; t < x.rows; ++t) k.matvec(w.value.data(), x.row(t).data(), y.row(t).data(), w.rows(), w.cols());
    return y;
}

void linear_backward_input(const Matrix& dy, const Param& w, Matrix& dx) {
    const auto& k = simd::active();
    const std::size_t in = w.cols();
    for (std::size_t t = 0; t < dy.rows; ++t) {
        double* out = dx.row(t).data();
        for (std::size_t o = 0; o < w.rows(); ++o) {
            const double g = dy(t, o);
            if (g != 0.0) k.axpy(g, w.value.data() + o * in, out, in);
        }
    }
}

void linear_backward_weight(const Matrix& dy, const Matrix& x, Param& w) {
    if (!w.trainable) return;
    const auto& k = simd::active();
    const std::size_t in = w.cols();
    for (std::size_t t = 0; t < dy.rows; ++t) {
        const double* xr = x.row(t).data();
        for (std::size_t o = 0; o < w.rows(); ++o) {
            const double g = dy(t, o);
            if (g != 0.0) k.axpy(g, xr, w.grad.data() + o * in, in);
        }
    }
}

std::string checksum(const Param& p) {
    std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(p.value.data()), p.value.size() * sizeof(double));
    return sha256_hex(bytes);
}

}  // namespace elm::model
