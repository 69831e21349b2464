#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "elm/common/error.hpp"
#include "elm/simd/kernels.hpp"
#include "elm/tasks/topics.hpp"

namespace elm::tasks {

namespace {

struct MergeRow {
    std::size_t left;
    std::size_t right;
    double distance;
    std::size_t size;
};

struct CondensedRow {
    std::size_t parent;
    std::size_t child;
    double lambda;
    std::size_t child_size;
};

double euclid(const Matrix& x, std::size_t i, std::size_t j) {
    double s = 0.0;
    const auto a = x.row(i);
    const auto b = x.row(j);
    for (std::size_t d = 0; d < a.size(); ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
    return std::sqrt(s);
}

std::vector<double> core_distances(const Matrix& x, std::size_t k) {
    const std::size_t n = x.rows;
    std::vector<double> core(n), row(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) row[j] = i == j ? 0.0 : euclid(x, i, j);
        std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k - 1), row.end());
        core[i] = row[k - 1];
    }
    return core;
}

// Prim's algorithm over the dense mutual-reachability graph, then
// single-linkage merges in order of edge weight.
std::vector<MergeRow> single_linkage(const Matrix& x, const std::vector<double>& core) {
    const std::size_t n = x.rows;
    std::vector<bool> in_tree(n, false);
    std::vector<double> best(n, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> from(n, 0);
    struct Edge {
        std::size_t a, b;
        double w;
    };
    std::vector<Edge> edges;
    std::size_t cur = 0;
    in_tree[0] = true;
    for (std::size_t step = 1; step < n; ++step) {
        std::size_t next = n;
        double next_w = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (in_tree[j]) continue;
            const double mr = std::max({core[cur], core[j], euclid(x, cur, j)});
            if (mr < best[j]) {
                best[j] = mr;
                from[j] = cur;
            }
            if (best[j] < next_w || next == n) {
                next_w = best[j];
                next = j;
            }
        }
        edges.push_back({from[next], next, next_w});
        in_tree[next] = true;
        cur = next;
    }
    std::stable_sort(edges.begin(), edges.end(), [](const Edge& l, const Edge& r) { return l.w < r.w; });

    std::vector<std::size_t> parent(2 * n - 1);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    std::vector<std::size_t> size(2 * n - 1, 1);
    auto find = [&](std::size_t v) {
        while (parent[v] != v) {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        return v;
    };
    std::vector<MergeRow> rows;
    std::size_t next_label = n;
    for (const auto& e : edges) {
        const std::size_t ra = find(e.a), rb = find(e.b);
        rows.push_back({ra, rb, e.w, size[ra] + size[rb]});
        parent[ra] = parent[rb] = next_label;
        size[next_label] = size[ra] + size[rb];
        ++next_label;
    }
    return rows;
}

std::vector<CondensedRow> condense(const std::vector<MergeRow>& tree, std::size_t n, std::size_t min_cluster_size) {
    const std::size_t root = 2 * n - 2;
    auto node_size = [&](std::size_t v) { return v < n ? std::size_t{1} : tree[v - n].size; };
    auto leaves = [&](std::size_t v) {
        std::vector<std::size_t> out, stack{v};
        while (!stack.empty()) {
            const std::size_t u = stack.back();
            stack.pop_back();
            if (u < n) {
                out.push_back(u);
            } else {
                stack.push_back(tree[u - n].left);
                stack.push_back(tree[u - n].right);
            }
        }
        return out;
    };
    std::vector<std::size_t> relabel(2 * n - 1, 0);
    relabel[root] = n;
    std::size_t next_label = n + 1;
    std::vector<CondensedRow> out;
    std::vector<std::size_t> queue{root};
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        const std::size_t node = queue[qi];
        if (node < n) continue;
        const auto& m = tree[node - n];
        const double lambda = 1.0 / std::max(m.distance, 1e-12);
        const std::size_t lc = node_size(m.left), rc = node_size(m.right);
        const std::size_t p = relabel[node];
        auto fall_out = [&](std::size_t child) {
            for (std::size_t leaf : leaves(child)) out.push_back({p, leaf, lambda, 1});
        };
        if (lc >= min_cluster_size && rc >= min_cluster_size) {
            relabel[m.left] = next_label++;
            out.push_back({p, relabel[m.left], lambda, lc});
            relabel[m.right] = next_label++;
            out.push_back({p, relabel[m.right], lambda, rc});
            queue.push_back(m.left);
            queue.push_back(m.right);
        } else if (lc < min_cluster_size && rc < min_cluster_size) {
            fall_out(m.left);
            fall_out(m.right);
        } else if (lc < min_cluster_size) {
            relabel[m.right] = p;
            fall_out(m.left);
            queue.push_back(m.right);
        } else {
            relabel[m.left] = p;
            fall_out(m.right);
            queue.push_back(m.left);
        }
    }
    return out;
}

}  // namespace

std::vector<int> hdbscan(const Matrix& points, const HdbscanConfig& cfg) {
    const std::size_t n = points.rows;
    const std::size_t mcs = cfg.min_cluster_size;
    if (mcs < 2) throw ValidationError("min_cluster_size must be at least 2");
    if (n < mcs)
        throw ValidationError("only " + std::to_string(n) + " points for min_cluster_size " + std::to_string(mcs));
    const std::size_t ms = std::min(cfg.min_samples ? cfg.min_samples : mcs, n);
    if (n == 1) return {-1};

    const auto core = core_distances(points, ms);
    const auto tree = single_linkage(points, core);
    const auto rows = condense(tree, n, mcs);

    const std::size_t root = n;
    std::map<std::size_t, double> birth{{root, 0.0}};
    std::map<std::size_t, double> stability{{root, 0.0}};
    std::map<std::size_t, std::vector<std::size_t>> children;
    std::map<std::size_t, std::size_t> cluster_parent;
    for (const auto& r : rows)
        if (r.child >= n) {
            birth[r.child] = r.lambda;
            stability.emplace(r.child, 0.0);
            children[r.parent].push_back(r.child);
            cluster_parent[r.child] = r.parent;
        }
    for (const auto& r : rows) stability[r.parent] += (r.lambda - birth[r.parent]) * static_cast<double>(r.child_size);

    // excess of mass, leaves first; the root is never selected
    std::map<std::size_t, bool> selected;
    for (const auto& [c, s] : stability) selected[c] = c != root;
    for (auto it = stability.rbegin(); it != stability.rend(); ++it) {
        const std::size_t c = it->first;
        if (c == root) continue;
        double subtree = 0.0;
        for (std::size_t ch : children[c]) subtree += stability[ch];
        if (subtree > stability[c]) {
            selected[c] = false;
            stability[c] = subtree;
        } else {
            std::vector<std::size_t> stack(children[c].begin(), children[c].end());
            while (!stack.empty()) {
                const std::size_t u = stack.back();
                stack.pop_back();
                selected[u] = false;
                for (std::size_t ch : children[u]) stack.push_back(ch);
            }
        }
    }
    std::map<std::size_t, int> label_of;
    for (const auto& [c, on] : selected)
        if (on) label_of.emplace(c, static_cast<int>(label_of.size()));

    std::vector<int> labels(n, -1);
    for (const auto& r : rows) {
        if (r.child >= n) continue;
        std::size_t c = r.parent;
        while (true) {
            if (auto it = label_of.find(c); it != label_of.end()) {
                labels[r.child] = it->second;
                break;
            }
            auto up = cluster_parent.find(c);
            if (up == cluster_parent.end()) break;
            c = up->second;
        }
    }
    return labels;
}

}  // namespace elm::tasks
