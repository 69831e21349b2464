#pragma once

#include <cstddef>
#include <vector>

namespace elm::cav {

struct SvmConfig {
    double C = 1.0;
    double tolerance = 1e-6;  // KKT violation stopping threshold
    std::size_t max_iterations = 1'000'000;

    void validate() const;
};

struct LinearSvm {
    std::vector<double> w;
    double b = 0.0;
    std::vector<double> alpha;  // dual coefficients
    std::size_t iterations = 0;
    bool converged = false;

    double decision(const std::vector<double>& x) const;
};

// Soft-margin linear SVM solved in the dual by SMO with second-order
// working-set selection. labels are +1 / -1.
LinearSvm train_linear_svm(const std::vector<std::vector<double>>& x, const std::vector<int>& labels,
                           const SvmConfig& cfg = {});

}  // namespace elm::cav
