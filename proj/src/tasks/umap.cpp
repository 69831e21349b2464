#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "elm/common/error.hpp"
#include "elm/common/rng.hpp"
#include "elm/simd/kernels.hpp"
#include "elm/tasks/topics.hpp"

namespace elm::tasks {

void UmapConfig::validate() const {
    if (n_neighbors < 2) throw ValidationError("umap n_neighbors must be at least 2");
    if (n_components == 0) throw ValidationError("umap n_components must be positive");
    if (!(min_dist >= 0.0) || !(spread > 0.0) || min_dist > spread)
        throw ValidationError("umap needs 0 <= min_dist <= spread");
    if (!(learning_rate > 0.0)) throw ValidationError("umap learning_rate must be positive");
    if (metric != "cosine" && metric != "euclidean") throw ValidationError("umap metric must be cosine or euclidean");
}

std::pair<double, double> fit_ab(double spread, double min_dist) {
    constexpr int kPoints = 300;
    std::vector<double> xs(kPoints), ys(kPoints);
    for (int i = 0; i < kPoints; ++i) {
        xs[i] = 3.0 * spread * i / (kPoints - 1);
        ys[i] = xs[i] < min_dist ? 1.0 : std::exp(-(xs[i] - min_dist) / spread);
    }
    auto sse = [&](double a, double b) {
        double s = 0.0;
        for (int i = 0; i < kPoints; ++i) {
            const double r = 1.0 / (1.0 + a * std::pow(xs[i], 2.0 * b)) - ys[i];
            s += r * r;
        }
        return s;
    };
    // Levenberg-Marquardt from (1, 1)
    double a = 1.0, b = 1.0, lambda = 1e-3;
    double cur = sse(a, b);
    for (int it = 0; it < 500; ++it) {
        double jtj00 = 0, jtj01 = 0, jtj11 = 0, g0 = 0, g1 = 0;
        for (int i = 0; i < kPoints; ++i) {
            const double x = xs[i];
            const double p = x > 0.0 ? std::pow(x, 2.0 * b) : 0.0;
            const double den = 1.0 + a * p;
            const double f = 1.0 / den;
            const double r = f - ys[i];
            const double da = -p / (den * den);
            const double db = x > 0.0 ? -a * p * 2.0 * std::log(x) / (den * den) : 0.0;
            jtj00 += da * da;
            jtj01 += da * db;
            jtj11 += db * db;
            g0 += da * r;
            g1 += db * r;
        }
        bool improved = false;
        for (int tries = 0; tries < 30 && !improved; ++tries) {
            const double m00 = jtj00 * (1.0 + lambda), m11 = jtj11 * (1.0 + lambda);
            const double det = m00 * m11 - jtj01 * jtj01;
            if (det == 0.0) {
                lambda *= 10.0;
                continue;
            }
            const double step_a = -(m11 * g0 - jtj01 * g1) / det;
            const double step_b = -(m00 * g1 - jtj01 * g0) / det;
            const double na = a + step_a, nb = b + step_b;
            const double next = na > 0.0 && nb > 0.0 ? sse(na, nb) : std::numeric_limits<double>::infinity();
            if (next < cur) {
                const double gain = cur - next;
                a = na;
                b = nb;
                cur = next;
                lambda = std::max(lambda / 10.0, 1e-12);
                improved = true;
                if (gain < 1e-15 * std::max(1.0, cur)) return {a, b};
            } else {
                lambda *= 10.0;
            }
        }
        if (!improved) break;
    }
    return {a, b};
}

KnnGraph knn_graph(const Matrix& points, std::size_t k, const std::string& metric) {
    const std::size_t n = points.rows;
    if (k > n) throw ValidationError("n_neighbors " + std::to_string(k) + " exceeds the number of points " + std::to_string(n));
    const bool cosine = metric == "cosine";
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        norms[i] = std::sqrt(simd::sum_squares(points.row(i)));
        if (cosine && norms[i] == 0.0) throw ValidationError("cosine metric needs nonzero points");
    }
    KnnGraph g;
    g.indices.resize(n);
    g.distances.resize(n);
    std::vector<std::pair<double, std::size_t>> row(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double d;
            if (i == j) {
                d = -1.0;  // keeps self first
            } else if (cosine) {
                d = std::max(0.0, 1.0 - simd::dot(points.row(i), points.row(j)) / (norms[i] * norms[j]));
            } else {
                d = std::sqrt(std::max(0.0, norms[i] * norms[i] + norms[j] * norms[j] -
                                                2.0 * simd::dot(points.row(i), points.row(j))));
            }
            row[j] = {d, j};
        }
        std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k), row.end());
        for (std::size_t m = 0; m < k; ++m) {
            g.indices[i].push_back(row[m].second);
            g.distances[i].push_back(std::max(0.0, row[m].first));
        }
    }
    return g;
}

std::vector<FuzzyEdge> fuzzy_simplicial_set(const KnnGraph& knn) {
    const std::size_t n = knn.indices.size();
    constexpr double kSmoothTol = 1e-5;
    constexpr double kMinKDistScale = 1e-3;
    double mean_all = 0.0;
    std::size_t count_all = 0;
    for (const auto& d : knn.distances)
        for (double v : d) {
            mean_all += v;
            ++count_all;
        }
    mean_all /= std::max<std::size_t>(count_all, 1);

    std::map<std::pair<std::size_t, std::size_t>, std::pair<double, double>> w;  // (i<j) -> (w_ij, w_ji)
    for (std::size_t i = 0; i < n; ++i) {
        const auto& d = knn.distances[i];
        const std::size_t k = d.size();
        const double target = std::log2(static_cast<double>(k));
        double rho = 0.0;
        for (std::size_t m = 1; m < k; ++m)
            if (d[m] > 0.0) {
                rho = d[m];
                break;
            }
        double lo = 0.0, hi = std::numeric_limits<double>::infinity(), mid = 1.0;
        for (int it = 0; it < 64; ++it) {
            double psum = 0.0;
            for (std::size_t m = 1; m < k; ++m) {
                const double x = d[m] - rho;
                psum += x > 0.0 ? std::exp(-x / mid) : 1.0;
            }
            if (std::abs(psum - target) < kSmoothTol) break;
            if (psum > target) {
                hi = mid;
                mid = (lo + hi) / 2.0;
            } else {
                lo = mid;
                mid = std::isinf(hi) ? mid * 2.0 : (lo + hi) / 2.0;
            }
        }
        double mean_i = 0.0;
        for (double v : d) mean_i += v;
        mean_i /= static_cast<double>(k);
        const double sigma = std::max(mid, kMinKDistScale * (rho > 0.0 ? mean_i : mean_all));
        for (std::size_t m = 1; m < k; ++m) {
            const std::size_t j = knn.indices[i][m];
            if (j == i) continue;
            const double x = d[m] - rho;
            const double val = x <= 0.0 || sigma == 0.0 ? 1.0 : std::exp(-x / sigma);
            auto& e = w[{std::min(i, j), std::max(i, j)}];
            (i < j ? e.first : e.second) = val;
        }
    }
    std::vector<FuzzyEdge> out;
    out.reserve(w.size());
    for (const auto& [key, v] : w) {
        const double combined = v.first + v.second - v.first * v.second;
        if (combined > 0.0) out.push_back({key.first, key.second, combined});
    }
    return out;
}

Matrix umap_reduce(const Matrix& points, const UmapConfig& cfg) {
    cfg.validate();
    const std::size_t n = points.rows;
    if (n <= cfg.n_neighbors) throw ValidationError("umap needs more points than n_neighbors");
    const KnnGraph knn = knn_graph(points, cfg.n_neighbors, cfg.metric);
    auto edges = fuzzy_simplicial_set(knn);
    const std::size_t n_epochs = cfg.n_epochs ? cfg.n_epochs : (n <= 10000 ? 500 : 200);
    const auto [a, b] = fit_ab(cfg.spread, cfg.min_dist);

    double max_w = 0.0;
    for (const auto& e : edges) max_w = std::max(max_w, e.weight);
    std::vector<std::size_t> head, tail;
    std::vector<double> eps;
    for (const auto& e : edges) {
        if (e.weight < max_w / static_cast<double>(n_epochs)) continue;
        const double per = max_w / e.weight;  // n_epochs / (n_epochs * w / max_w)
        head.push_back(e.i);
        tail.push_back(e.j);
        eps.push_back(per);
        head.push_back(e.j);
        tail.push_back(e.i);
        eps.push_back(per);
    }

    Rng rng(cfg.seed);
    const std::size_t dim = cfg.n_components;
    Matrix y(n, dim);
    for (double& v : y.data) v = rng.uniform(-10.0, 10.0);

    const double neg_rate = static_cast<double>(cfg.negative_sample_rate);
    std::vector<double> next_sample = eps;
    std::vector<double> eps_neg(eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i) eps_neg[i] = eps[i] / neg_rate;
    std::vector<double> next_neg = eps_neg;
    auto clip = [](double v) { return std::clamp(v, -4.0, 4.0); };
    auto rdist = [&](const double* p, const double* q) {
        double s = 0.0;
        for (std::size_t d = 0; d < dim; ++d) s += (p[d] - q[d]) * (p[d] - q[d]);
        return s;
    };
    for (std::size_t epoch = 0; epoch < n_epochs; ++epoch) {
        const double ep = static_cast<double>(epoch);
        const double alpha = cfg.learning_rate * (1.0 - ep / static_cast<double>(n_epochs));
        for (std::size_t e = 0; e < head.size(); ++e) {
            if (next_sample[e] > ep) continue;
            double* cur = y.row(head[e]).data();
            double* oth = y.row(tail[e]).data();
            const double d2 = rdist(cur, oth);
            const double gc = d2 > 0.0 ? -2.0 * a * b * std::pow(d2, b - 1.0) / (a * std::pow(d2, b) + 1.0) : 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                const double g = clip(gc * (cur[d] - oth[d]));
                cur[d] += g * alpha;
                oth[d] -= g * alpha;
            }
            next_sample[e] += eps[e];
            const auto n_neg = static_cast<std::size_t>(std::max(0.0, (ep - next_neg[e]) / eps_neg[e]));
            for (std::size_t p = 0; p < n_neg; ++p) {
                const std::size_t k = rng.below(n);
                if (k == head[e]) continue;
                const double* neg = y.row(k).data();
                const double nd2 = rdist(cur, neg);
                const double ngc = nd2 > 0.0 ? 2.0 * b / ((0.001 + nd2) * (a * std::pow(nd2, b) + 1.0)) : 0.0;
                for (std::size_t d = 0; d < dim; ++d) {
                    const double g = ngc > 0.0 ? clip(ngc * (cur[d] - neg[d])) : 4.0;
                    cur[d] += g * alpha;
                }
            }
            next_neg[e] += static_cast<double>(n_neg) * eps_neg[e];
        }
    }
    return y;
}

}  // namespace elm::tasks
