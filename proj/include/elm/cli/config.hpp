#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "elm/cav/svm.hpp"
#include "elm/embedding/backend.hpp"
#include "elm/llm/client.hpp"
#include "elm/model/generation.hpp"
#include "elm/tasks/topics.hpp"
#include "elm/training/trainer.hpp"

namespace elm::cli {

struct DataConfig {
    // pairs per mode as a fraction of the record count, unless n_same /
    // n_different are set (> 0)
    double pair_fraction = 0.634;
    std::size_t n_same = 0;
    std::size_t n_different = 0;
};

struct GenerationDefaults {
    double temperature = 1.0;
    std::size_t max_new_tokens = 256;
    model::PenaltyScope penalty_scope = model::PenaltyScope::prompt_and_generated;
    double repetition_penalty = 0.0;  // 0: per-task default
};

struct EvalConfig {
    std::size_t n_seeds = 5;
    std::size_t max_parallel = 1;
    std::size_t interp_pairs = 100;
};

struct CavConfig {
    cav::SvmConfig svm;
    std::vector<double> alphas;
    double balance_tolerance = 0.1;
    std::string positive_class;  // empty: concept default
};

struct AppConfig {
    std::uint64_t seed = 42;
    std::filesystem::path run_root = "runs";
    std::filesystem::path cache_dir = "cache";
    embedding::BackendConfig embedding;
    llm::ClientConfig oracle;
    llm::ClientConfig judge;
    tasks::UmapConfig umap;
    std::vector<std::size_t> min_cluster_sizes;
    DataConfig data;
    training::TrainConfig training;
    std::string plan_name;
    double adapter_lr = 1e-3;
    double joint_lr = 5e-5;
    GenerationDefaults generation;
    EvalConfig evaluation;
    CavConfig cav;
    training::PretrainConfig base;

    nlohmann::json resolved;  // defaults applied, before ${VAR} interpolation
};

// Full default tree.
nlohmann::json default_config();

// Merges `user` over the defaults: unknown keys and type mismatches are
// rejected with the dotted key path.
nlohmann::json merge_config(const nlohmann::json& user);

// ${NAME} in string values is replaced by the environment variable NAME.
nlohmann::json interpolate_env(const nlohmann::json& tree);

// Validates ranges and builds typed structs from a merged tree.
AppConfig build_config(const nlohmann::json& merged);

// Empty path: defaults only.
AppConfig load_config(const std::filesystem::path& path);

// Masks values under secret-looking keys (key, secret, token, password).
nlohmann::json redact_secrets(const nlohmann::json& tree);

}  // namespace elm::cli
