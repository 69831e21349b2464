#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "elm/tasks/task.hpp"

namespace elm::tasks {

struct TopicAssignment {
    std::string record_id;
    int topic_id = -1;  // -1 = noise
    std::vector<double> reduced_coords;
};

struct PairSpec {
    std::string id_a;
    std::string id_b;
    bool same_topic = false;
};

struct PairCapacity {
    std::uint64_t same = 0;
    std::uint64_t different = 0;
};

// Number of distinct unordered pairs available per kind (noise excluded).
PairCapacity pair_capacity(std::span<const TopicAssignment> assignments);

// Exactly n_same same-topic and n_diff cross-topic pairs, each uniform over
// eligible unordered pairs without replacement. Same-topic pairs come first.
std::vector<PairSpec> sample_pairs(std::span<const TopicAssignment> assignments, std::size_t n_same,
                                   std::size_t n_diff, std::uint64_t seed);

// Round-robin stream over tasks (in TaskKind order). Each task draws from a
// shuffled permutation of its indices, reshuffling when exhausted; the stream
// stops after the round that finishes the largest task.
std::vector<std::pair<TaskKind, std::size_t>> interleave_schedule(const std::map<TaskKind, std::size_t>& sizes,
                                                                  std::uint64_t seed);

}  // namespace elm::tasks
