#include "elm/model/prompt.hpp"

#include <algorithm>

#include "elm/common/error.hpp"

namespace elm::model {

void MixedPrompt::validate() const {
    if (segments.empty()) throw ValidationError("prompt has no segments");
    std::vector<int> used(embeddings.size(), 0);
    for (const auto& s : segments) {
        if (const auto* slot = std::get_if<EmbeddingSlot>(&s)) {
            if (slot->index >= embeddings.size())
                throw ValidationError("slot index " + std::to_string(slot->index) + " has no embedding (" +
                                      std::to_string(embeddings.size()) + " supplied)");
            if (used[slot->index]++) throw ValidationError("slot index " + std::to_string(slot->index) + " used twice");
        }
    }
    for (std::size_t i = 0; i < used.size(); ++i)
        if (!used[i]) throw ValidationError("embedding " + std::to_string(i) + " is not referenced by any slot");
    for (const auto& e : embeddings)
        if (e.dim() == 0) throw ValidationError("prompt embedding is empty");
}

std::size_t MixedPrompt::slot_count() const {
    return static_cast<std::size_t>(std::count_if(segments.begin(), segments.end(), [](const Segment& s) {
        return std::holds_alternative<EmbeddingSlot>(s);
    }));
}

MixedPrompt make_prompt(std::string_view instruction, std::vector<embedding::EmbeddingVector> embeddings) {
    MixedPrompt p;
    std::size_t pos = 0;
    std::size_t next_slot = 0;
    while (pos <= instruction.size()) {
        const auto hit = instruction.find(kSlotMarker, pos);
        const auto end = hit == std::string_view::npos ? instruction.size() : hit;
        if (end > pos) p.segments.emplace_back(TextSegment{std::string(instruction.substr(pos, end - pos))});
        if (hit == std::string_view::npos) break;
        p.segments.emplace_back(EmbeddingSlot{next_slot++});
        pos = hit + kSlotMarker.size();
    }
    p.embeddings = std::move(embeddings);
    p.validate();
    return p;
}

std::string render_instruction(const MixedPrompt& prompt) {
    std::string out;
    for (const auto& s : prompt.segments) {
        if (const auto* t = std::get_if<TextSegment>(&s))
            out += t->text;
        else
            out += Tokenizer::kEmbSlot;
    }
    return out;
}

std::string apply_chat_template(std::string_view user_turn) {
    std::string out;
    out += Tokenizer::kBos;
    out += Tokenizer::kSystem;
    out += Tokenizer::kEnd;
    out += Tokenizer::kUser;
    out += user_turn;
    out += Tokenizer::kEnd;
    out += Tokenizer::kAssistant;
    return out;
}

namespace {

// Token ids of the templated prompt with slots in segment order. Text is
// encoded segment by segment so user text can never produce a sentinel.
std::vector<int> encode_prompt(const MixedPrompt& prompt, const Tokenizer& tok, std::vector<std::size_t>& slot_of) {
    std::vector<int> ids{tok.bos_id(), tok.system_id(), tok.end_id(), tok.user_id()};
    for (const auto& s : prompt.segments) {
        if (const auto* t = std::get_if<TextSegment>(&s)) {
            for (int id : tok.encode(t->text))
                ids.push_back(id == tok.slot_id() ? tok.unk_id() : id);
        } else {
            slot_of.push_back(std::get<EmbeddingSlot>(s).index);
            ids.push_back(tok.slot_id());
        }
    }
    ids.push_back(tok.end_id());
    ids.push_back(tok.assistant_id());
    return ids;
}

AssembledInput assemble_ids(const MixedPrompt& prompt, std::vector<int> ids, const std::vector<std::size_t>& slot_of,
                            const AdapterParams& params, const BaseModelFrontEnd& front) {
    const auto& cfg = front.model.config();
    if (ids.size() > cfg.max_seq_len)
        throw ValidationError("assembled sequence has " + std::to_string(ids.size()) +
                              " positions but the context window is " + std::to_string(cfg.max_seq_len));
    if (params.d_base() != cfg.d_model)
        throw ValidationError("adapter output width " + std::to_string(params.d_base()) +
                              " does not match the model width " + std::to_string(cfg.d_model));
    AssembledInput out;
    out.vectors = front.model.embed_tokens(ids);
    out.token_ids = std::move(ids);
    out.attention_mask.assign(out.token_ids.size(), 1);
    const std::size_t n_slots = prompt.embeddings.size();
    out.slot_positions.assign(n_slots, 0);
    std::size_t k = 0;
    for (std::size_t pos = 0; pos < out.token_ids.size(); ++pos)
        if (out.token_ids[pos] == front.tokenizer.slot_id()) out.slot_positions[slot_of[k++]] = pos;
    if (n_slots == 0) return out;
    const std::size_t d_emb = prompt.embeddings[0].dim();
    out.slot_inputs = Matrix(n_slots, d_emb);
    for (std::size_t i = 0; i < n_slots; ++i) {
        const auto v = prompt.embeddings[i].values();
        if (v.size() != d_emb) throw ValidationError("prompt embeddings differ in dimension");
        std::copy(v.begin(), v.end(), out.slot_inputs.row(i).begin());
    }
    const Matrix projected = adapter_forward(out.slot_inputs, params, &out.adapter_cache);
    for (std::size_t i = 0; i < n_slots; ++i) {
        const auto src = projected.row(i);
        std::copy(src.begin(), src.end(), out.vectors.row(out.slot_positions[i]).begin());
    }
    return out;
}

}  // namespace

AssembledInput assemble_mixed_input(const MixedPrompt& prompt, const AdapterParams& params,
                                    const BaseModelFrontEnd& front) {
    prompt.validate();
    std::vector<std::size_t> slot_of;
    auto ids = encode_prompt(prompt, front.tokenizer, slot_of);
    return assemble_ids(prompt, std::move(ids), slot_of, params, front);
}

std::vector<int> mask_prompt_labels(std::span<const int> next_tokens, std::size_t prompt_length) {
    std::vector<int> labels(next_tokens.begin(), next_tokens.end());
    // position prompt_length - 1 predicts the first target token
    for (std::size_t t = 0; t + 1 < prompt_length && t < labels.size(); ++t) labels[t] = -1;
    return labels;
}

TrainingSequence build_training_sequence(const MixedPrompt& prompt, std::string_view target,
                                         const AdapterParams& params, const BaseModelFrontEnd& front,
                                         std::size_t max_len) {
    prompt.validate();
    if (target.empty()) throw ValidationError("training target is empty");
    const std::size_t ctx = front.model.config().max_seq_len;
    const std::size_t limit = max_len == 0 ? ctx : std::min(max_len, ctx);
    std::vector<std::size_t> slot_of;
    auto ids = encode_prompt(prompt, front.tokenizer, slot_of);
    const std::size_t prompt_len = ids.size();
    if (prompt_len >= limit)
        throw ValidationError("prompt of " + std::to_string(prompt_len) + " positions leaves no room for the target in " +
                              std::to_string(limit));
    for (int id : front.tokenizer.encode(target)) ids.push_back(id);
    ids.push_back(front.tokenizer.end_id());
    TrainingSequence seq;
    if (ids.size() > limit) {
        ids.resize(limit);
        seq.truncated = true;
    }
    seq.prompt_length = prompt_len;
    std::vector<int> next(ids.size(), -1);
    for (std::size_t t = 0; t + 1 < ids.size(); ++t) next[t] = ids[t + 1];
    seq.labels = mask_prompt_labels(next, prompt_len);
    seq.target_tokens = ids.size() - prompt_len;
    seq.input = assemble_ids(prompt, std::move(ids), slot_of, params, front);
    return seq;
}

}  // namespace elm::model
