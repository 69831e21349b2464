#include "elm/model/generation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "elm/common/error.hpp"
#include "elm/common/rng.hpp"

namespace elm::model {

std::string penalty_scope_name(PenaltyScope s) {
    return s == PenaltyScope::prompt_and_generated ? "prompt_and_generated" : "generated_only";
}

PenaltyScope parse_penalty_scope(const std::string& s) {
    if (s == "prompt_and_generated") return PenaltyScope::prompt_and_generated;
    if (s == "generated_only") return PenaltyScope::generated_only;
    throw ValidationError("unknown penalty scope '" + s + "'");
}

void GenerationConfig::validate() const {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ValidationError("temperature must be > 0");
    if (!(repetition_penalty >= 1.0) || !std::isfinite(repetition_penalty))
        throw ValidationError("repetition_penalty must be >= 1");
}

void apply_repetition_penalty(std::span<double> logits, const std::vector<bool>& seen, double penalty) {
    if (penalty == 1.0) return;
    const std::size_t n = std::min(logits.size(), seen.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (!seen[i]) continue;
        logits[i] = logits[i] > 0.0 ? logits[i] / penalty : logits[i] * penalty;
    }
}

std::vector<double> apply_repetition_penalty(std::span<const double> logits, std::span<const int> context_ids,
                                             double penalty) {
    std::vector<double> out(logits.begin(), logits.end());
    std::vector<bool> seen(out.size(), false);
    for (int id : context_ids)
        if (id >= 0 && static_cast<std::size_t>(id) < seen.size()) seen[static_cast<std::size_t>(id)] = true;
    apply_repetition_penalty(out, seen, penalty);
    return out;
}

GenerationResult generate_ids(const MixedPrompt& prompt, const AdapterParams& params, const Tokenizer& tokenizer,
                              const DecoderModel& model, const GenerationConfig& cfg) {
    cfg.validate();
    const AssembledInput in = assemble_mixed_input(prompt, params, BaseModelFrontEnd{tokenizer, model});
    GenerationResult out;
    if (cfg.max_new_tokens == 0) return out;
    const std::size_t ctx = model.config().max_seq_len;
    if (in.token_ids.size() >= ctx)
        throw ValidationError("prompt of " + std::to_string(in.token_ids.size()) +
                              " positions leaves no room in a context window of " + std::to_string(ctx));

    const std::size_t vocab = model.config().vocab_size;
    std::vector<bool> seen(vocab, false);
    if (cfg.penalty_scope == PenaltyScope::prompt_and_generated)
        for (int id : in.token_ids) seen[static_cast<std::size_t>(id)] = true;

    DecoderModel::Session session(model);
    std::vector<double> logits;
    for (std::size_t t = 0; t < in.vectors.rows; ++t) logits = session.step(in.vectors.row(t));

    Rng rng(cfg.seed);
    std::vector<double> probs(vocab);
    for (std::size_t step = 0; step < cfg.max_new_tokens; ++step) {
        for (double v : logits)
            if (!std::isfinite(v)) throw Error("non-finite logits at generation step " + std::to_string(step));
        apply_repetition_penalty(logits, seen, cfg.repetition_penalty);
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < vocab; ++i) {
            const int id = static_cast<int>(i);
            const bool allowed = !tokenizer.is_special(id) || id == tokenizer.end_id() || id == tokenizer.eos_id();
            probs[i] = allowed ? logits[i] / cfg.temperature : -std::numeric_limits<double>::infinity();
            mx = std::max(mx, probs[i]);
        }
        double total = 0.0;
        for (double& p : probs) {
            p = std::exp(p - mx);
            total += p;
        }
        const double u = rng.uniform() * total;
        double acc = 0.0;
        std::size_t pick = vocab - 1;
        while (pick > 0 && probs[pick] == 0.0) --pick;
        for (std::size_t i = 0; i < vocab; ++i) {
            acc += probs[i];
            if (u < acc && probs[i] > 0.0) {
                pick = i;
                break;
            }
        }
        const int id = static_cast<int>(pick);
        if (id == tokenizer.end_id() || id == tokenizer.eos_id()) {
            out.hit_end = true;
            break;
        }
        out.token_ids.push_back(id);
        seen[pick] = true;
        if (in.token_ids.size() + out.token_ids.size() >= ctx) break;
        logits = session.step(model.token_embedding().row(pick));
    }
    out.text = tokenizer.decode(out.token_ids);
    return out;
}

std::string generate(const MixedPrompt& prompt, const AdapterParams& params, const Tokenizer& tokenizer,
                     const DecoderModel& model, const GenerationConfig& cfg) {
    return generate_ids(prompt, params, tokenizer, model, cfg).text;
}

}  // namespace elm::model
