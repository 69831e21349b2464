#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "elm/common/rng.hpp"
#include "elm/model/adapter.hpp"
#include "elm/model/checkpoint.hpp"
#include "elm/model/decoder.hpp"
#include "elm/tasks/task.hpp"

namespace elm::training {

enum class PhaseKind { adapter_only, joint };

std::string phase_name(PhaseKind k);
PhaseKind parse_phase(const std::string& s);

struct PhaseSpec {
    PhaseKind kind = PhaseKind::joint;
    std::size_t epochs = 1;
    double learning_rate = 5e-5;

    void validate() const;
};

// "1P-1E", "1P-2E" -> joint x epochs; "2P-1E" -> adapter_only then joint.
std::vector<PhaseSpec> parse_plan(const std::string& name, double adapter_lr = 1e-3, double joint_lr = 5e-5);

struct TrainConfig {
    std::vector<PhaseSpec> plan;
    std::uint64_t seed = 42;
    std::size_t max_seq_len = 2048;
    std::size_t batch_size = 4;
    std::size_t grad_accum = 8;
    double max_grad_norm = 1.0;
    std::string precision = "bf16-mixed";  // recorded; math runs in double
    double warmup_fraction = 0.03;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t checkpoint_every = 0;  // optimizer steps; 0 = epoch ends only
    std::size_t adapter_hidden = 2048;
    model::Activation adapter_activation = model::Activation::relu;
    model::LoraSpec lora;

    void validate() const;
};

// ---- loss ------------------------------------------------------------------

struct LossResult {
    double loss = 0.0;        // mean NLL over target tokens
    std::size_t tokens = 0;
    bool truncated = false;
};

// Mean NLL over target positions; prompt and slot positions carry no loss.
LossResult compute_loss(const tasks::TaskInstance& instance, const model::AdapterParams& adapter,
                        model::BaseModel& base, std::size_t max_seq_len);

// Same loss; accumulates grad_scale * (sum of NLL) into trainable tensors of
// the adapter and the decoder.
LossResult loss_and_gradients(const tasks::TaskInstance& instance, model::AdapterParams& adapter,
                              model::BaseModel& base, std::size_t max_seq_len, double grad_scale,
                              Rng* dropout_rng);

// Token-weighted mean loss over instances (inference mode).
double mean_loss(std::span<const tasks::TaskInstance> instances, const model::AdapterParams& adapter,
                 model::BaseModel& base, std::size_t max_seq_len);

// ---- optimisation ------------------------------------------------------------

// AdamW over a fixed tensor list with per-tensor moment buffers.
class AdamW {
public:
    AdamW(std::vector<model::Param*> params, double beta1, double beta2, double eps, double weight_decay);
    void step(double lr);
    std::size_t steps() const { return t_; }

private:
    std::vector<model::Param*> params_;
    std::vector<std::vector<double>> m_, v_;
    double beta1_, beta2_, eps_, weight_decay_;
    std::size_t t_ = 0;
};

// Linear warmup to the peak, then linear decay to zero.
double linear_schedule(double peak_lr, std::size_t step, std::size_t warmup, std::size_t total);

// Scales gradients so their global L2 norm is at most max_norm; returns the
// norm before clipping.
double clip_grad_norm(std::span<model::Param* const> params, double max_norm);

// ---- runs --------------------------------------------------------------------

struct LossRow {
    std::size_t step = 0;
    std::string phase;
    double lr = 0.0;
    double loss = 0.0;
    double grad_norm = 0.0;
};

struct TrainingState {
    model::BaseModel& base;
    model::AdapterParams& adapter;
    std::size_t global_step = 0;
    std::vector<LossRow> history;
    std::vector<model::PhaseRecord> phases;
};

struct RunContext {
    std::filesystem::path run_dir;  // empty: nothing written
    std::string run_id;
    std::string base_model_path;
    // called after each optimizer step (tests, progress)
    std::function<void(const LossRow&)> on_step;
};

// One phase over the instance stream, `spec.epochs` passes in stream order.
void run_phase(const PhaseSpec& spec, std::size_t phase_index, std::span<const tasks::TaskInstance> stream,
               TrainingState& state, const TrainConfig& cfg, const RunContext& ctx);

struct TrainingResult {
    model::CheckpointManifest manifest;
    std::vector<LossRow> history;
    std::filesystem::path final_checkpoint;
};

// Attaches low-rank factors when the plan has a joint phase, runs every
// phase, and writes loss.csv and checkpoints under ctx.run_dir.
TrainingResult run_training(const TrainConfig& cfg, std::span<const tasks::TaskInstance> stream,
                            model::BaseModel& base, model::AdapterParams& adapter, const RunContext& ctx);

// Fresh adapter sized for the base model and the embedding dimension.
model::AdapterParams new_adapter(const TrainConfig& cfg, std::size_t d_emb, const model::BaseModel& base);

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRow>& rows);

// ---- base model ------------------------------------------------------------------

struct PretrainConfig {
    std::size_t vocab_size = 2000;
    std::size_t min_count = 2;
    model::DecoderConfig decoder;  // vocab_size is filled in
    std::size_t steps = 300;
    std::size_t batch_size = 8;
    double learning_rate = 3e-3;
    // share of samples wrapped in the chat template as a reply to
    // chat_instruction, so the base model also knows the assistant turn
    double chat_fraction = 0.5;
    std::string chat_instruction = "Write a clinical trial abstract.";
    std::uint64_t seed = 7;
};

// Builds a tokenizer over the texts and trains every decoder tensor on
// next-token prediction of "<|bos|>text<|eos|>".
model::BaseModel pretrain_base(std::span<const std::string> texts, const PretrainConfig& cfg, const std::string& id,
                               const std::function<void(std::size_t, double)>& on_step = {});

}  // namespace elm::training
