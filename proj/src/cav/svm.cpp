#include "elm/cav/svm.hpp"

#include <cmath>
#include <limits>

#include "elm/common/error.hpp"
#include "elm/simd/kernels.hpp"

namespace elm::cav {

void SvmConfig::validate() const {
    if (!(C > 0.0) || !std::isfinite(C)) throw ValidationError("svm C must be positive");
    if (!(tolerance > 0.0)) throw ValidationError("svm tolerance must be positive");
    if (max_iterations == 0) throw ValidationError("svm max_iterations must be positive");
}

double LinearSvm::decision(const std::vector<double>& x) const { return simd::dot(w, x) + b; }

LinearSvm train_linear_svm(const std::vector<std::vector<double>>& x, const std::vector<int>& labels,
                           const SvmConfig& cfg) {
    cfg.validate();
    const std::size_t n = x.size();
    if (n != labels.size()) throw ValidationError("svm needs one label per point");
    if (n < 2) throw ValidationError("svm needs at least two points");
    const std::size_t d = x[0].size();
    for (const auto& r : x)
        if (r.size() != d) throw ValidationError("svm points have different dimensions");
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != 1 && labels[i] != -1) throw ValidationError("svm labels must be +1 or -1");
        y[i] = labels[i];
    }

    std::vector<double> K(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) K[i * n + j] = K[j * n + i] = simd::dot(x[i], x[j]);

    const double C = cfg.C;
    constexpr double tau = 1e-12;
    std::vector<double> a(n, 0.0), G(n, -1.0);
    auto up = [&](std::size_t t) { return (y[t] > 0 && a[t] < C) || (y[t] < 0 && a[t] > 0); };
    auto low = [&](std::size_t t) { return (y[t] > 0 && a[t] > 0) || (y[t] < 0 && a[t] < C); };

    LinearSvm out;
    for (; out.iterations < cfg.max_iterations; ++out.iterations) {
        double gmax = -std::numeric_limits<double>::infinity();
        std::size_t i = n;
        for (std::size_t t = 0; t < n; ++t)
            if (up(t) && -y[t] * G[t] >= gmax) {
                gmax = -y[t] * G[t];
                i = t;
            }
        double gmin = std::numeric_limits<double>::infinity();
        double best = std::numeric_limits<double>::infinity();
        std::size_t j = n;
        for (std::size_t t = 0; t < n; ++t) {
            if (!low(t)) continue;
            const double v = -y[t] * G[t];
            gmin = std::min(gmin, v);
            if (i == n) continue;
            const double bit = gmax - v;
            if (bit > 0) {
                double ait = K[i * n + i] + K[t * n + t] - 2.0 * K[i * n + t];
                if (ait <= 0) ait = tau;
                const double obj = -(bit * bit) / ait;
                if (obj <= best) {
                    best = obj;
                    j = t;
                }
            }
        }
        if (i == n || j == n || gmax - gmin < cfg.tolerance) {
            out.converged = true;
            break;
        }
        // two-variable subproblem, as in LIBSVM
        const double Qii = K[i * n + i], Qjj = K[j * n + j], Qij = y[i] * y[j] * K[i * n + j];
        const double old_ai = a[i], old_aj = a[j];
        if (y[i] != y[j]) {
            double quad = Qii + Qjj + 2.0 * Qij;
            if (quad <= 0) quad = tau;
            const double delta = (-G[i] - G[j]) / quad;
            const double diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if (diff > 0) {
                if (a[j] < 0) { a[j] = 0; a[i] = diff; }
            } else {
                if (a[i] < 0) { a[i] = 0; a[j] = -diff; }
            }
            if (diff > 0) {
                if (a[i] > C) { a[i] = C; a[j] = C - diff; }
            } else {
                if (a[j] > C) { a[j] = C; a[i] = C + diff; }
            }
        } else {
            double quad = Qii + Qjj - 2.0 * Qij;
            if (quad <= 0) quad = tau;
            const double delta = (G[i] - G[j]) / quad;
            const double sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if (sum > C) {
                if (a[i] > C) { a[i] = C; a[j] = sum - C; }
            } else {
                if (a[j] < 0) { a[j] = 0; a[i] = sum; }
            }
            if (sum > C) {
                if (a[j] > C) { a[j] = C; a[i] = sum - C; }
            } else {
                if (a[i] < 0) { a[i] = 0; a[j] = sum; }
            }
        }
        const double dai = a[i] - old_ai, daj = a[j] - old_aj;
        for (std::size_t t = 0; t < n; ++t)
            G[t] += y[t] * (y[i] * K[t * n + i] * dai + y[j] * K[t * n + j] * daj);
    }

    // bias from free vectors, else the midpoint of the feasible interval
    double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity(), sum = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y[t] * G[t];
        if (a[t] >= C) {
            if (y[t] < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (a[t] <= 0) {
            if (y[t] > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum += yg;
        }
    }
    const double rho = n_free > 0 ? sum / static_cast<double>(n_free) : (ub + lb) / 2.0;
    out.b = -rho;
    out.w.assign(d, 0.0);
    for (std::size_t t = 0; t < n; ++t)
        if (a[t] != 0.0) simd::axpy(a[t] * y[t], x[t], out.w);
    out.alpha = std::move(a);
    return out;
}

}  // namespace elm::cav
