#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "elm/common/rng.hpp"
#include "elm/model/tensor.hpp"

namespace elm::model {

// Size of the frozen chat model. The decoder is a pre-norm transformer with
// learned positions, RMSNorm, multi-head causal attention and a GELU MLP.
struct DecoderConfig {
    std::size_t vocab_size = 0;
    std::size_t d_model = 64;
    std::size_t n_layers = 2;
    std::size_t n_heads = 4;
    std::size_t d_ff = 256;
    std::size_t max_seq_len = 512;
    double norm_eps = 1e-5;

    void validate() const;
};

struct LoraSpec {
    std::size_t rank = 16;
    double alpha = 32.0;
    double dropout = 0.05;
    // subset of {query, key, value, output}
    std::vector<std::string> target_projections{"query", "key"};
    std::string bias = "none";

    void validate() const;
    double scale() const { return alpha / static_cast<double>(rank); }
};

struct LoraPair {
    Param a;  // rank x in
    Param b;  // out x rank, zero at init
};

// Frozen dense projection with an optional low-rank update:
//   y = x W^T + scale * (dropout(x) A^T) B^T
struct Projection {
    Param weight;
    std::optional<LoraPair> lora;
    double lora_scale = 0.0;
    double lora_dropout = 0.0;
};

struct DecoderLayer {
    Param attn_norm;
    Projection wq, wk, wv, wo;
    Param mlp_norm;
    Param w_up;
    Param w_down;
};

struct PassOptions {
    // enables LoRA dropout; needs rng
    bool training = false;
    Rng* rng = nullptr;
};

struct PassResult {
    double nll_sum = 0.0;
    std::size_t count = 0;
    double mean() const { return count == 0 ? 0.0 : nll_sum / static_cast<double>(count); }
};

class DecoderModel {
public:
    DecoderModel(DecoderConfig cfg, Rng& rng);
    // Zero-initialised tensors, for loading.
    explicit DecoderModel(DecoderConfig cfg);

    const DecoderConfig& config() const { return cfg_; }

    // Attaches low-rank factors (A uniform, B zero) to the targeted projections.
    void add_lora(const LoraSpec& spec, Rng& rng);
    bool has_lora() const { return lora_spec_.has_value(); }
    const std::optional<LoraSpec>& lora_spec() const { return lora_spec_; }

    Param& token_embedding() { return tok_emb_; }
    const Param& token_embedding() const { return tok_emb_; }

    // Everything except the low-rank factors, token table included.
    std::vector<Param*> dense_params();
    std::vector<const Param*> dense_params() const;
    std::vector<Param*> lora_params();
    std::vector<const Param*> lora_params() const;

    // Sets trainable flags. The token table follows train_token_embedding.
    void set_trainable(bool dense, bool lora, bool train_token_embedding = false);

    // Teacher-forced pass. inputs holds one input vector per position
    // (token embedding or adapter output); labels[t] is the token expected
    // after position t, or -1 when position t carries no loss. When
    // grad_scale != 0, gradients of grad_scale * nll_sum are accumulated into
    // trainable tensors and, if d_inputs is given, into d_inputs.
    PassResult forward_backward(const Matrix& inputs, std::span<const int> labels, double grad_scale,
                                const PassOptions& opt, Matrix* d_inputs = nullptr);

    // Logits at every position (inference mode).
    Matrix forward_logits(const Matrix& inputs);

    // Rows of the token table for the given ids.
    Matrix embed_tokens(std::span<const int> ids) const;

    // Incremental decoding with a key/value cache.
    class Session {
    public:
        explicit Session(const DecoderModel& model);
        // Appends one position and returns the logits predicted after it.
        std::vector<double> step(std::span<const double> input);
        std::size_t length() const { return length_; }

    private:
        const DecoderModel& model_;
        std::vector<std::vector<double>> keys_;
        std::vector<std::vector<double>> values_;
        std::size_t length_ = 0;
    };

private:
    void allocate();

    DecoderConfig cfg_;
    Param tok_emb_;  // vocab x d_model
    Param pos_emb_;  // max_seq_len x d_model
    std::vector<DecoderLayer> layers_;
    Param final_norm_;
    Param lm_head_;  // vocab x d_model
    std::optional<LoraSpec> lora_spec_;
};

}  // namespace elm::model
