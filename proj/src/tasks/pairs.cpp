#include "elm/tasks/pairs.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "elm/common/error.hpp"
#include "elm/common/rng.hpp"

namespace elm::tasks {

namespace {

struct Groups {
    std::vector<const TopicAssignment*> members;  // non-noise points
    std::vector<std::size_t> topic_of;            // group index per member
    std::vector<std::vector<std::size_t>> by_topic;
};

Groups group(std::span<const TopicAssignment> assignments) {
    Groups g;
    std::map<int, std::size_t> slot;
    for (const auto& a : assignments) {
        if (a.topic_id < -1) throw ValidationError("topic id below -1 for " + a.record_id);
        if (a.topic_id == -1) continue;
        auto [it, fresh] = slot.emplace(a.topic_id, g.by_topic.size());
        if (fresh) g.by_topic.emplace_back();
        g.by_topic[it->second].push_back(g.members.size());
        g.topic_of.push_back(it->second);
        g.members.push_back(&a);
    }
    return g;
}

std::uint64_t choose2(std::uint64_t n) { return n < 2 ? 0 : n * (n - 1) / 2; }

using Key = std::pair<std::size_t, std::size_t>;
Key unordered(std::size_t a, std::size_t b) { return a < b ? Key{a, b} : Key{b, a}; }

// Draws `count` distinct pairs from an explicit list.
std::vector<Key> draw_from_list(std::vector<Key> all, std::size_t count, Rng& rng) {
    for (std::size_t i = 0; i < count; ++i) std::swap(all[i], all[i + rng.below(all.size() - i)]);
    all.resize(count);
    return all;
}

}  // namespace

PairCapacity pair_capacity(std::span<const TopicAssignment> assignments) {
    const Groups g = group(assignments);
    PairCapacity c;
    for (const auto& t : g.by_topic) c.same += choose2(t.size());
    c.different = choose2(g.members.size()) - c.same;
    return c;
}

std::vector<PairSpec> sample_pairs(std::span<const TopicAssignment> assignments, std::size_t n_same,
                                   std::size_t n_diff, std::uint64_t seed) {
    const Groups g = group(assignments);
    std::uint64_t cap_same = 0;
    for (const auto& t : g.by_topic) cap_same += choose2(t.size());
    const std::uint64_t cap_diff = choose2(g.members.size()) - cap_same;
    if (n_same > cap_same || n_diff > cap_diff)
        throw ValidationError("requested " + std::to_string(n_same) + " same-topic and " + std::to_string(n_diff) +
                              " cross-topic pairs, but at most " + std::to_string(cap_same) + " and " +
                              std::to_string(cap_diff) + " are available");
    {
        std::set<std::string> ids;
        for (const auto* m : g.members)
            if (!ids.insert(m->record_id).second) throw ValidationError("duplicate record id " + m->record_id);
    }
    std::vector<PairSpec> out;
    out.reserve(n_same + n_diff);
    auto emit = [&](const std::vector<Key>& keys, bool same, Rng& rng) {
        for (auto [a, b] : keys) {
            if (rng.below(2)) std::swap(a, b);
            out.push_back({g.members[a]->record_id, g.members[b]->record_id, same});
        }
    };

    // same-topic: a topic with probability proportional to its pair count, then
    // a uniform pair inside it, which is uniform over all same-topic pairs
    {
        Rng rng(derive_seed(seed, "pairs.same"));
        std::vector<Key> keys;
        if (2 * n_same > cap_same) {
            std::vector<Key> all;
            for (const auto& t : g.by_topic)
                for (std::size_t i = 0; i < t.size(); ++i)
                    for (std::size_t j = i + 1; j < t.size(); ++j) all.push_back(unordered(t[i], t[j]));
            keys = draw_from_list(std::move(all), n_same, rng);
        } else {
            std::vector<std::uint64_t> cum;
            std::uint64_t acc = 0;
            for (const auto& t : g.by_topic) cum.push_back(acc += choose2(t.size()));
            std::set<Key> seen;
            while (keys.size() < n_same) {
                const std::uint64_t r = rng.below(acc);
                const auto ti = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), r) - cum.begin());
                const auto& t = g.by_topic[ti];
                const std::size_t i = rng.below(t.size());
                const std::size_t j = rng.below(t.size());
                if (i == j) continue;
                const Key k = unordered(t[i], t[j]);
                if (seen.insert(k).second) keys.push_back(k);
            }
        }
        emit(keys, true, rng);
    }
    // cross-topic: uniform unordered pairs of members, rejecting same-topic
    // ones; topic pairs are therefore hit in proportion to size products
    {
        Rng rng(derive_seed(seed, "pairs.different"));
        std::vector<Key> keys;
        const std::size_t n = g.members.size();
        if (2 * n_diff > cap_diff) {
            std::vector<Key> all;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j)
                    if (g.topic_of[i] != g.topic_of[j]) all.emplace_back(i, j);
            keys = draw_from_list(std::move(all), n_diff, rng);
        } else {
            std::set<Key> seen;
            while (keys.size() < n_diff) {
                const std::size_t i = rng.below(n);
                const std::size_t j = rng.below(n);
                if (i == j || g.topic_of[i] == g.topic_of[j]) continue;
                const Key k = unordered(i, j);
                if (seen.insert(k).second) keys.push_back(k);
            }
        }
        emit(keys, false, rng);
    }
    return out;
}

std::vector<std::pair<TaskKind, std::size_t>> interleave_schedule(const std::map<TaskKind, std::size_t>& sizes,
                                                                  std::uint64_t seed) {
    if (sizes.empty()) throw ValidationError("interleave_schedule needs at least one dataset");
    std::size_t largest = 0;
    for (auto [k, n] : sizes) {
        if (n == 0) throw ValidationError("dataset " + task_name(k) + " is empty");
        largest = std::max(largest, n);
    }
    struct Stream {
        TaskKind kind;
        std::vector<std::size_t> perm;
        std::size_t pos = 0;
        Rng rng;
    };
    std::vector<Stream> streams;
    for (auto [k, n] : sizes) {
        Stream s{k, std::vector<std::size_t>(n), 0, Rng(derive_seed(seed, "interleave." + task_name(k)))};
        std::iota(s.perm.begin(), s.perm.end(), std::size_t{0});
        s.rng.shuffle(std::span<std::size_t>(s.perm));
        streams.push_back(std::move(s));
    }
    std::vector<std::pair<TaskKind, std::size_t>> out;
    out.reserve(largest * streams.size());
    for (std::size_t round = 0; round < largest; ++round) {
        for (auto& s : streams) {
            if (s.pos == s.perm.size()) {
                s.rng.shuffle(std::span<std::size_t>(s.perm));
                s.pos = 0;
            }
            out.emplace_back(s.kind, s.perm[s.pos++]);
        }
    }
    return out;
}

}  // namespace elm::tasks
