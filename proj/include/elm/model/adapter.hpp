#pragma once

#include <string>
#include <vector>

#include "elm/common/rng.hpp"
#include "elm/model/tensor.hpp"

namespace elm::model {

enum class Activation { relu, gelu };

std::string activation_name(Activation a);
Activation parse_activation(const std::string& s);

// Two-layer projection from the external embedding space into the decoder's
// token-embedding space: W1 act(W0 z + b0) + b1.
struct AdapterParams {
    Param w0;  // hidden x d_emb
    Param b0;  // hidden
    Param w1;  // d_base x hidden
    Param b1;  // d_base
    Activation activation = Activation::relu;

    std::size_t d_emb() const { return w0.cols(); }
    std::size_t hidden() const { return w0.rows(); }
    std::size_t d_base() const { return w1.rows(); }

    std::vector<Param*> params() { return {&w0, &b0, &w1, &b1}; }
    std::vector<const Param*> params() const { return {&w0, &b0, &w1, &b1}; }

    // Shape agreement and finite entries; throws ValidationError.
    void validate() const;
    void set_trainable(bool on);
};

AdapterParams make_adapter(std::size_t d_emb, std::size_t hidden, std::size_t d_base, Activation act);
// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
AdapterParams init_adapter(std::size_t d_emb, std::size_t hidden, std::size_t d_base, Activation act, Rng& rng);

struct AdapterCache {
    Matrix pre;     // W0 z + b0
    Matrix hidden;  // act(pre)
};

// z: n x d_emb -> n x d_base. Fills cache when given (needed for backward).
Matrix adapter_forward(const Matrix& z, const AdapterParams& params, AdapterCache* cache = nullptr);

// Accumulates parameter gradients (trainable tensors only) and, when dz is
// given, adds the input gradient into it.
void adapter_backward(const Matrix& z, AdapterParams& params, const AdapterCache& cache, const Matrix& d_out,
                      Matrix* dz = nullptr);

}  // namespace elm::model
