#pragma once

#include <cmath>

namespace elm::model::detail {

inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

// tanh approximation
inline double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x))); }

inline double gelu_grad(double x) {
    const double th = std::tanh(kGeluC * (x + 0.044715 * x * x * x));
    const double du = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
    return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du;
}

}  // namespace elm::model::detail
