#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace elm::model {

// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

// A named parameter tensor with its gradient buffer. Gradients accumulate
// only while `trainable` is set.
struct Param {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool trainable = false;

    Param() = default;
    Param(std::string n, std::vector<std::size_t> s);

    std::size_t size() const { return value.size(); }
    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    std::span<const double> row(std::size_t i) const { return {value.data() + i * cols(), cols()}; }
    std::span<double> grad_row(std::size_t i) { return {grad.data() + i * cols(), cols()}; }
    void zero_grad();
};

// y = x W^T for every row of x; W is (out x in).
Matrix linear(const Matrix& x, const Param& w);
// dx += dy W
void linear_backward_input(const Matrix& dy, const Param& w, Matrix& dx);
// dW += dy^T x (no-op for frozen tensors)
void linear_backward_weight(const Matrix& dy, const Matrix& x, Param& w);

// SHA-256 over the raw bytes of a parameter's values.
std::string checksum(const Param& p);

}  // namespace elm::model
