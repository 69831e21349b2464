#include "elm/model/adapter.hpp"

#include <cmath>

#include "elm/common/error.hpp"
#include "elm/simd/kernels.hpp"
#include "activations.hpp"

namespace elm::model {

namespace {

using detail::gelu;
using detail::gelu_grad;

void fill_uniform(Param& p, double bound, Rng& rng) {
    for (double& v : p.value) v = rng.uniform(-bound, bound);
}

}  // namespace

std::string activation_name(Activation a) { return a == Activation::relu ? "relu" : "gelu"; }

Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "gelu") return Activation::gelu;
    throw ValidationError("unknown activation '" + s + "' (expected relu or gelu)");
}

void AdapterParams::validate() const {
    if (w0.shape.size() != 2 || b0.shape.size() != 1 || w1.shape.size() != 2 || b1.shape.size() != 1)
        throw ValidationError("adapter tensors have the wrong rank");
    if (b0.size() != w0.rows() || w1.cols() != w0.rows() || b1.size() != w1.rows())
        throw ValidationError("adapter tensor shapes are inconsistent");
    for (const Param* p : params())
        for (double v : p->value)
            if (!std::isfinite(v)) throw ValidationError("adapter tensor " + p->name + " has a non-finite entry");
}

void AdapterParams::set_trainable(bool on) {
    for (Param* p : params()) p->trainable = on;
}

AdapterParams make_adapter(std::size_t d_emb, std::size_t hidden, std::size_t d_base, Activation act) {
    if (d_emb == 0 || hidden == 0 || d_base == 0) throw ValidationError("adapter sizes must be positive");
    return AdapterParams{Param("adapter.w0", {hidden, d_emb}), Param("adapter.b0", {hidden}),
                         Param("adapter.w1", {d_base, hidden}), Param("adapter.b1", {d_base}), act};
}

AdapterParams init_adapter(std::size_t d_emb, std::size_t hidden, std::size_t d_base, Activation act, Rng& rng) {
    AdapterParams p = make_adapter(d_emb, hidden, d_base, act);
    const double bound0 = 1.0 / std::sqrt(static_cast<double>(d_emb));
    const double bound1 = 1.0 / std::sqrt(static_cast<double>(hidden));
    fill_uniform(p.w0, bound0, rng);
    fill_uniform(p.b0, bound0, rng);
    fill_uniform(p.w1, bound1, rng);
    fill_uniform(p.b1, bound1, rng);
    return p;
}

Matrix adapter_forward(const Matrix& z, const AdapterParams& params, AdapterCache* cache) {
    if (z.cols != params.d_emb())
        throw ValidationError("adapter_forward: input has " + std::to_string(z.cols) + " columns, adapter expects " +
                              std::to_string(params.d_emb()));
    Matrix pre = linear(z, params.w0);
    for (std::size_t i = 0; i < pre.rows; ++i) simd::axpy(1.0, params.b0.value, pre.row(i));
    Matrix hidden = pre;
    if (params.activation == Activation::relu) {
        simd::relu(hidden.data);
    } else {
        for (double& v : hidden.data) v = gelu(v);
    }
    Matrix out = linear(hidden, params.w1);
    for (std::size_t i = 0; i < out.rows; ++i) simd::axpy(1.0, params.b1.value, out.row(i));
    if (cache) {
        cache->pre = std::move(pre);
        cache->hidden = std::move(hidden);
    }
    return out;
}

void adapter_backward(const Matrix& z, AdapterParams& params, const AdapterCache& cache, const Matrix& d_out,
                      Matrix* dz) {
    if (params.b1.trainable)
        for (std::size_t i = 0; i < d_out.rows; ++i) simd::axpy(1.0, d_out.row(i), params.b1.grad);
    linear_backward_weight(d_out, cache.hidden, params.w1);
    Matrix d_hidden(d_out.rows, params.hidden());
    linear_backward_input(d_out, params.w1, d_hidden);
    for (std::size_t i = 0; i < d_hidden.data.size(); ++i) {
        const double x = cache.pre.data[i];
        d_hidden.data[i] *= params.activation == Activation::relu ? (x > 0.0 ? 1.0 : 0.0) : gelu_grad(x);
    }
    if (params.b0.trainable)
        for (std::size_t i = 0; i < d_hidden.rows; ++i) simd::axpy(1.0, d_hidden.row(i), params.b0.grad);
    linear_backward_weight(d_hidden, z, params.w0);
    if (dz) linear_backward_input(d_hidden, params.w0, *dz);
}

}  // namespace elm::model
