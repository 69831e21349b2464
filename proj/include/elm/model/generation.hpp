#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "elm/model/adapter.hpp"
#include "elm/model/decoder.hpp"
#include "elm/model/prompt.hpp"
#include "elm/model/tokenizer.hpp"

namespace elm::model {

// Which token ids count as "already seen" for the repetition penalty.
enum class PenaltyScope { prompt_and_generated, generated_only };

std::string penalty_scope_name(PenaltyScope s);
PenaltyScope parse_penalty_scope(const std::string& s);

struct GenerationConfig {
    double temperature = 1.0;
    double repetition_penalty = 1.0;
    std::size_t max_new_tokens = 256;
    std::uint64_t seed = 0;
    PenaltyScope penalty_scope = PenaltyScope::prompt_and_generated;

    void validate() const;
};

// CTRL-style penalty: seen positive logits are divided by the penalty, seen
// negative logits multiplied. `seen` is indexed by token id.
void apply_repetition_penalty(std::span<double> logits, const std::vector<bool>& seen, double penalty);
std::vector<double> apply_repetition_penalty(std::span<const double> logits, std::span<const int> context_ids,
                                             double penalty);

struct GenerationResult {
    std::string text;
    std::vector<int> token_ids;
    bool hit_end = false;
};

// Samples a reply token by token from the assembled prompt.
GenerationResult generate_ids(const MixedPrompt& prompt, const AdapterParams& params, const Tokenizer& tokenizer,
                              const DecoderModel& model, const GenerationConfig& cfg);

std::string generate(const MixedPrompt& prompt, const AdapterParams& params, const Tokenizer& tokenizer,
                     const DecoderModel& model, const GenerationConfig& cfg);

}  // namespace elm::model
