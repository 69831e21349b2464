#pragma once

#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "elm/embedding/vector.hpp"
#include "elm/model/adapter.hpp"
#include "elm/model/decoder.hpp"
#include "elm/model/tokenizer.hpp"

namespace elm::model {

struct TextSegment {
    std::string text;
};

struct EmbeddingSlot {
    std::size_t index = 0;
};

using Segment = std::variant<TextSegment, EmbeddingSlot>;

// Instruction text interleaved with embedding slots.
struct MixedPrompt {
    std::vector<Segment> segments;
    std::vector<embedding::EmbeddingVector> embeddings;

    // slot indices are exactly 0..n-1, each used once; at least one segment
    void validate() const;
    std::size_t slot_count() const;
};

// Marker used in instruction templates for an embedding slot.
inline constexpr std::string_view kSlotMarker = "<z>";

// Splits an instruction at "<z>" markers; slots are numbered left to right.
MixedPrompt make_prompt(std::string_view instruction, std::vector<embedding::EmbeddingVector> embeddings);

// The user turn with slots written as the sentinel token.
std::string render_instruction(const MixedPrompt& prompt);

// Chat template with an empty system message; ends where the reply starts.
std::string apply_chat_template(std::string_view user_turn);

// The frozen pieces of the chat model that turn text into input vectors.
struct BaseModelFrontEnd {
    const Tokenizer& tokenizer;
    const DecoderModel& model;
};

struct AssembledInput {
    Matrix vectors;                          // one d_base row per position
    std::vector<int> token_ids;              // sentinel id at slot positions
    std::vector<std::size_t> slot_positions; // position of slot i
    std::vector<int> attention_mask;         // all ones (single sequence)
    Matrix slot_inputs;                      // embeddings, one row per slot
    AdapterCache adapter_cache;
};

AssembledInput assemble_mixed_input(const MixedPrompt& prompt, const AdapterParams& params,
                                    const BaseModelFrontEnd& front);

// Prompt followed by the target reply and the end-of-turn token, with labels
// set only where the next token belongs to the reply.
// When the whole sequence exceeds max_len (0 = the model's context) the
// target tail is cut; the prompt is never shortened.
struct TrainingSequence {
    AssembledInput input;
    std::vector<int> labels;
    std::size_t prompt_length = 0;
    std::size_t target_tokens = 0;  // positions carrying a label
    bool truncated = false;
};

// next_tokens[t] is the token at t + 1 (-1 past the end); every position
// before prompt_length - 1 becomes -1 (no loss).
std::vector<int> mask_prompt_labels(std::span<const int> next_tokens, std::size_t prompt_length);

TrainingSequence build_training_sequence(const MixedPrompt& prompt, std::string_view target,
                                         const AdapterParams& params, const BaseModelFrontEnd& front,
                                         std::size_t max_len = 0);

}  // namespace elm::model
