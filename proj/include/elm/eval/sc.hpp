#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "elm/embedding/embedder.hpp"
#include "elm/model/checkpoint.hpp"
#include "elm/model/generation.hpp"
#include "elm/model/prompt.hpp"
#include "elm/tasks/task.hpp"

namespace elm::eval {

// Produces text for a prompt; `seed` makes sampling reproducible per item.
using TextGenerator = std::function<std::string(const model::MixedPrompt& prompt, std::uint64_t seed)>;

// Samples from a trained checkpoint with `cfg`, overriding its seed per call.
TextGenerator checkpoint_generator(const model::ElmCheckpoint& checkpoint, model::GenerationConfig cfg);

// 1.2 for emb2abs, 1.0 for the other tasks.
double default_repetition_penalty(tasks::TaskKind kind);
model::GenerationConfig default_generation_config(tasks::TaskKind kind, std::uint64_t seed = 0);

// One test item. SC is taken against target_vector when present (novel
// vectors such as interpolations), otherwise against embed(target_text).
struct EvalItem {
    std::string id;
    model::MixedPrompt prompt;
    std::string target_text;
    std::optional<embedding::EmbeddingVector> target_vector;
};

EvalItem eval_item_from_instance(const tasks::TaskInstance& instance);

struct ItemFailure {
    std::size_t index = 0;
    std::string id;
    std::string message;
};

struct SCReport {
    tasks::TaskKind task = tasks::TaskKind::emb2abs;
    std::size_t n = 0;
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
    std::vector<std::string> ids;
    std::vector<double> scores;
    std::vector<std::string> generations;
    std::vector<ItemFailure> failures;
    std::string config_digest;

    void validate() const;
};

struct ScOptions {
    std::uint64_t seed = 0;
    std::size_t max_parallel = 1;
};

// Decodes every item, scores SC and aggregates over successful items.
SCReport eval_sc(tasks::TaskKind task, const std::vector<EvalItem>& items, const TextGenerator& generate,
                 embedding::Embedder& embedder, const ScOptions& options = {}, const std::string& config_digest = {});

// Rebuilds mean/std/n from scores.
void aggregate(SCReport& report);

void write_sc_report(const std::filesystem::path& path, const SCReport& report);
SCReport read_sc_report(const std::filesystem::path& path);

struct InterpolatedItem {
    embedding::EmbeddingVector vector;
    std::size_t first = 0;
    std::size_t second = 0;  // first < second
};

// n_pairs distinct unordered pairs of test embeddings, each averaged and
// renormalized.
std::vector<InterpolatedItem> build_interpolated_testset(const std::vector<embedding::EmbeddingVector>& embeddings,
                                                         std::size_t n_pairs, std::uint64_t seed);

// Mean and population standard deviation.
std::pair<double, double> mean_std(const std::vector<double>& xs);

}  // namespace elm::eval
