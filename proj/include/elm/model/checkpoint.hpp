#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "elm/model/adapter.hpp"
#include "elm/model/decoder.hpp"
#include "elm/model/tokenizer.hpp"

namespace elm::model {

// The frozen chat model: tokenizer plus decoder weights.
struct BaseModel {
    std::string id;
    Tokenizer tokenizer;
    DecoderModel decoder;
};

// <dir>/base.json (id, config, vocabulary) and <dir>/weights.bin.
void save_base_model(const std::filesystem::path& dir, const BaseModel& base);
BaseModel load_base_model(const std::filesystem::path& dir);

struct PhaseRecord {
    std::string name;       // e.g. "adapter_only", "joint"
    std::string trainable;  // "adapter" or "adapter+lora"
    std::size_t steps = 0;
    std::size_t epochs = 0;
    double learning_rate = 0.0;
    double final_loss = 0.0;
};

struct CheckpointManifest {
    std::string base_model_id;
    std::string base_model_path;
    std::size_t d_emb = 0;
    std::size_t hidden = 0;
    std::size_t d_base = 0;
    Activation activation = Activation::relu;
    std::optional<LoraSpec> low_rank;
    std::string training_run_id;
    std::string data_digest;
    std::vector<PhaseRecord> phase_history;
};

// A trained ELM: base model with its low-rank factors, plus the adapter.
struct ElmCheckpoint {
    CheckpointManifest manifest;
    BaseModel base;
    AdapterParams adapter;
};

// <dir>/manifest.json, <dir>/adapter.bin and, with low-rank factors,
// <dir>/lora.bin. The base weights are referenced, not copied.
void save_checkpoint(const std::filesystem::path& dir, const CheckpointManifest& manifest, const AdapterParams& adapter,
                     const DecoderModel& decoder);

// base_override replaces the manifest's base_model_path when non-empty.
ElmCheckpoint load_checkpoint(const std::filesystem::path& dir, const std::filesystem::path& base_override = {});

}  // namespace elm::model
