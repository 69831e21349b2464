#include "elm/training/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <regex>
#include <sstream>

#include "elm/common/digest.hpp"
#include "elm/common/error.hpp"
#include "elm/model/prompt.hpp"
#include "elm/model/tokenizer.hpp"
#include "elm/simd/kernels.hpp"

namespace elm::training {

using model::AdapterParams;
using model::BaseModel;
using model::Matrix;
using model::Param;

std::string phase_name(PhaseKind k) { return k == PhaseKind::adapter_only ? "adapter_only" : "joint"; }

PhaseKind parse_phase(const std::string& s) {
    if (s == "adapter_only") return PhaseKind::adapter_only;
    if (s == "joint") return PhaseKind::joint;
    throw ValidationError("unknown phase kind '" + s + "' (expected adapter_only or joint)");
}

void PhaseSpec::validate() const {
    if (epochs < 1) throw ValidationError("phase epochs must be at least 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw ValidationError("phase learning_rate must be positive");
}

std::vector<PhaseSpec> parse_plan(const std::string& name, double adapter_lr, double joint_lr) {
    static const std::regex re(R"(([0-9]+)P-([0-9]+)E)");
    std::smatch m;
    if (!std::regex_match(name, m, re)) throw ValidationError("cannot parse training plan '" + name + "'");
    const int phases = std::stoi(m[1]);
    const int epochs = std::stoi(m[2]);
    if (epochs < 1) throw ValidationError("plan '" + name + "' has no epochs");
    if (phases == 1) return {PhaseSpec{PhaseKind::joint, static_cast<std::size_t>(epochs), joint_lr}};
    if (phases == 2 && epochs == 1)
        return {PhaseSpec{PhaseKind::adapter_only, 1, adapter_lr}, PhaseSpec{PhaseKind::joint, 1, joint_lr}};
    throw ValidationError("unsupported training plan '" + name + "' (expected 1P-yE or 2P-1E)");
}

void TrainConfig::validate() const {
    if (plan.empty()) throw ValidationError("training plan is empty");
    for (const auto& p : plan) p.validate();
    if (max_seq_len == 0 || batch_size == 0 || grad_accum == 0 || adapter_hidden == 0)
        throw ValidationError("max_seq_len, batch_size, grad_accum and adapter_hidden must be positive");
    if (!(max_grad_norm > 0.0)) throw ValidationError("max_grad_norm must be positive");
    if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) throw ValidationError("warmup_fraction must be in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ValidationError("weight_decay must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ValidationError("adam betas must be in [0, 1)");
    if (!(adam_eps > 0.0)) throw ValidationError("adam eps must be positive");
    lora.validate();
}

// ---- loss ------------------------------------------------------------------

namespace {

model::TrainingSequence prepare(const tasks::TaskInstance& inst, const AdapterParams& adapter, const BaseModel& base,
                                std::size_t max_seq_len) {
    auto seq = model::build_training_sequence(inst.prompt, inst.target, adapter,
                                              model::BaseModelFrontEnd{base.tokenizer, base.decoder}, max_seq_len);
    if (seq.target_tokens == 0) throw ValidationError("instance has no target tokens after truncation");
    return seq;
}

model::PassResult backprop(model::TrainingSequence& seq, AdapterParams& adapter, BaseModel& base, double grad_scale,
                           Rng* dropout_rng) {
    const model::PassOptions opt{dropout_rng != nullptr, dropout_rng};
    const bool adapter_grads = grad_scale != 0.0 && !seq.input.slot_positions.empty() &&
                               (adapter.w0.trainable || adapter.b0.trainable || adapter.w1.trainable ||
                                adapter.b1.trainable);
    Matrix d_in;
    const auto r = base.decoder.forward_backward(seq.input.vectors, seq.labels, grad_scale, opt,
                                                 adapter_grads ? &d_in : nullptr);
    if (adapter_grads) {
        Matrix d_out(seq.input.slot_positions.size(), adapter.d_base());
        for (std::size_t i = 0; i < seq.input.slot_positions.size(); ++i) {
            const auto src = d_in.row(seq.input.slot_positions[i]);
            std::copy(src.begin(), src.end(), d_out.row(i).begin());
        }
        model::adapter_backward(seq.input.slot_inputs, adapter, seq.input.adapter_cache, d_out, nullptr);
    }
    return r;
}

}  // namespace

LossResult compute_loss(const tasks::TaskInstance& instance, const AdapterParams& adapter, BaseModel& base,
                        std::size_t max_seq_len) {
    auto seq = prepare(instance, adapter, base, max_seq_len);
    const auto r = base.decoder.forward_backward(seq.input.vectors, seq.labels, 0.0, {}, nullptr);
    return {r.mean(), r.count, seq.truncated};
}

LossResult loss_and_gradients(const tasks::TaskInstance& instance, AdapterParams& adapter, BaseModel& base,
                              std::size_t max_seq_len, double grad_scale, Rng* dropout_rng) {
    auto seq = prepare(instance, adapter, base, max_seq_len);
    const auto r = backprop(seq, adapter, base, grad_scale, dropout_rng);
    return {r.mean(), r.count, seq.truncated};
}

double mean_loss(std::span<const tasks::TaskInstance> instances, const AdapterParams& adapter, BaseModel& base,
                 std::size_t max_seq_len) {
    double nll = 0.0;
    std::size_t tokens = 0;
    for (const auto& inst : instances) {
        const auto r = compute_loss(inst, adapter, base, max_seq_len);
        nll += r.loss * static_cast<double>(r.tokens);
        tokens += r.tokens;
    }
    return tokens == 0 ? 0.0 : nll / static_cast<double>(tokens);
}

// ---- optimisation ------------------------------------------------------------

AdamW::AdamW(std::vector<Param*> params, double beta1, double beta2, double eps, double weight_decay)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {
    for (const Param* p : params_) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
    }
}

void AdamW::step(double lr) {
    ++t_;
    simd::AdamWStep s;
    s.lr = lr;
    s.beta1 = beta1_;
    s.beta2 = beta2_;
    s.eps = eps_;
    s.weight_decay = weight_decay_;
    s.bias_correction1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    s.bias_correction2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const auto& k = simd::active();
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Param* p = params_[i];
        k.adamw(p->value.data(), p->grad.data(), m_[i].data(), v_[i].data(), p->size(), s);
    }
}

double linear_schedule(double peak_lr, std::size_t step, std::size_t warmup, std::size_t total) {
    if (step < warmup) return peak_lr * static_cast<double>(step) / static_cast<double>(std::max<std::size_t>(1, warmup));
    if (step >= total) return 0.0;
    return peak_lr * static_cast<double>(total - step) / static_cast<double>(std::max<std::size_t>(1, total - warmup));
}

double clip_grad_norm(std::span<Param* const> params, double max_norm) {
    double sq = 0.0;
    for (const Param* p : params) sq += simd::sum_squares(p->grad);
    const double norm = std::sqrt(sq);
    if (std::isfinite(norm) && norm > max_norm) {
        const double f = max_norm / (norm + 1e-6);
        for (Param* p : params) simd::scale(p->grad, f);
    }
    return norm;
}

// ---- runs --------------------------------------------------------------------

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRow>& rows) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << "step,phase,lr,loss,grad_norm\n" << std::setprecision(10);
    for (const auto& r : rows) out << r.step << ',' << r.phase << ',' << r.lr << ',' << r.loss << ',' << r.grad_norm << '\n';
}

AdapterParams new_adapter(const TrainConfig& cfg, std::size_t d_emb, const BaseModel& base) {
    Rng rng(derive_seed(cfg.seed, "adapter.init"));
    return model::init_adapter(d_emb, cfg.adapter_hidden, base.decoder.config().d_model, cfg.adapter_activation, rng);
}

namespace {

std::string data_digest(std::span<const tasks::TaskInstance> stream) {
    std::string all;
    for (const auto& inst : stream) {
        all += tasks::task_name(inst.kind);
        for (const auto& r : inst.embedding_refs) all += "|" + r;
        all += "|" + sha256_hex(inst.target) + "\n";
    }
    return sha256_hex(all);
}

model::CheckpointManifest make_manifest(const TrainingState& state, const TrainConfig& cfg, const RunContext& ctx,
                                        const std::string& digest) {
    (void)cfg;
    model::CheckpointManifest m;
    m.base_model_id = state.base.id;
    m.base_model_path = ctx.base_model_path;
    m.d_emb = state.adapter.d_emb();
    m.hidden = state.adapter.hidden();
    m.d_base = state.adapter.d_base();
    m.activation = state.adapter.activation;
    m.low_rank = state.base.decoder.lora_spec();
    m.training_run_id = ctx.run_id;
    m.data_digest = digest;
    m.phase_history = state.phases;
    return m;
}

void set_phase_trainable(PhaseKind kind, TrainingState& state) {
    state.adapter.set_trainable(true);
    state.base.decoder.set_trainable(false, kind == PhaseKind::joint, false);
}

std::vector<Param*> trainable_params(TrainingState& state) {
    std::vector<Param*> out;
    for (Param* p : state.adapter.params())
        if (p->trainable) out.push_back(p);
    for (Param* p : state.base.decoder.lora_params())
        if (p->trainable) out.push_back(p);
    for (Param* p : state.base.decoder.dense_params())
        if (p->trainable) out.push_back(p);
    return out;
}

}  // namespace

void run_phase(const PhaseSpec& spec, std::size_t phase_index, std::span<const tasks::TaskInstance> stream,
               TrainingState& state, const TrainConfig& cfg, const RunContext& ctx) {
    spec.validate();
    if (stream.empty()) throw ValidationError("training stream is empty");
    if (spec.kind == PhaseKind::joint && !state.base.decoder.has_lora())
        throw ValidationError("joint phase needs low-rank factors on the base model");
    set_phase_trainable(spec.kind, state);
    auto params = trainable_params(state);
    for (Param* p : params) p->zero_grad();
    AdamW opt(params, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay);

    const std::size_t n = stream.size();
    const std::size_t per_step = cfg.batch_size * cfg.grad_accum;
    const std::size_t steps_per_epoch = (n + per_step - 1) / per_step;
    const std::size_t total = steps_per_epoch * spec.epochs;
    const auto warmup = static_cast<std::size_t>(std::ceil(cfg.warmup_fraction * static_cast<double>(total)));
    Rng dropout(derive_seed(cfg.seed, "dropout.phase" + std::to_string(phase_index)));
    const std::string name = phase_name(spec.kind);
    const std::string digest = data_digest(stream);
    std::size_t phase_step = 0;

    auto save = [&](const std::string& tag) {
        if (ctx.run_dir.empty()) return;
        auto m = make_manifest(state, cfg, ctx, digest);
        model::save_checkpoint(ctx.run_dir / "checkpoints" / tag, m, state.adapter, state.base.decoder);
        write_loss_csv(ctx.run_dir / "loss.csv", state.history);
    };

    for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            const std::size_t begin = s * per_step;
            const std::size_t end = std::min(n, begin + per_step);
            const std::size_t n_micro = (end - begin + cfg.batch_size - 1) / cfg.batch_size;
            double step_nll = 0.0;
            std::size_t step_tokens = 0;
            for (std::size_t mb = 0; mb < n_micro; ++mb) {
                const std::size_t mb_begin = begin + mb * cfg.batch_size;
                const std::size_t mb_end = std::min(end, mb_begin + cfg.batch_size);
                std::vector<model::TrainingSequence> seqs;
                std::size_t mb_tokens = 0;
                for (std::size_t i = mb_begin; i < mb_end; ++i) {
                    seqs.push_back(prepare(stream[i], state.adapter, state.base, cfg.max_seq_len));
                    mb_tokens += seqs.back().target_tokens;
                }
                // micro-batch mean over tokens, averaged across accumulation
                const double scale = 1.0 / (static_cast<double>(mb_tokens) * static_cast<double>(n_micro));
                for (auto& seq : seqs) {
                    model::PassResult r;
                    try {
                        r = backprop(seq, state.adapter, state.base, scale, &dropout);
                    } catch (const Error& e) {
                        throw Error("training aborted at step " + std::to_string(state.global_step + 1) + ": " +
                                    e.what());
                    }
                    step_nll += r.nll_sum;
                    step_tokens += r.count;
                }
            }
            const double lr = linear_schedule(spec.learning_rate, phase_step, warmup, total);
            const double norm = clip_grad_norm(params, cfg.max_grad_norm);
            const double loss = step_nll / static_cast<double>(std::max<std::size_t>(1, step_tokens));
            if (!std::isfinite(loss) || !std::isfinite(norm))
                throw Error("non-finite loss or gradient at step " + std::to_string(state.global_step + 1));
            opt.step(lr);
            for (Param* p : params) p->zero_grad();
            ++phase_step;
            ++state.global_step;
            LossRow row{state.global_step, name, lr, loss, norm};
            state.history.push_back(row);
            if (ctx.on_step) ctx.on_step(row);
            if (cfg.checkpoint_every && state.global_step % cfg.checkpoint_every == 0)
                save("step" + std::to_string(state.global_step));
        }
        model::PhaseRecord rec{name, spec.kind == PhaseKind::joint ? "adapter+lora" : "adapter", phase_step, epoch + 1,
                               spec.learning_rate, state.history.empty() ? 0.0 : state.history.back().loss};
        if (epoch == 0)
            state.phases.push_back(rec);
        else
            state.phases.back() = rec;
        save("phase" + std::to_string(phase_index + 1) + "-" + name + "-epoch" + std::to_string(epoch + 1));
    }
    state.adapter.set_trainable(false);
    state.base.decoder.set_trainable(false, false, false);
}

TrainingResult run_training(const TrainConfig& cfg, std::span<const tasks::TaskInstance> stream, BaseModel& base,
                            AdapterParams& adapter, const RunContext& ctx) {
    cfg.validate();
    bool joint = false;
    for (const auto& p : cfg.plan) joint = joint || p.kind == PhaseKind::joint;
    if (joint && !base.decoder.has_lora()) {
        Rng rng(derive_seed(cfg.seed, "lora.init"));
        base.decoder.add_lora(cfg.lora, rng);
    }
    if (adapter.d_base() != base.decoder.config().d_model)
        throw ValidationError("adapter output width does not match the base model");
    TrainingState state{base, adapter, 0, {}, {}};
    for (std::size_t i = 0; i < cfg.plan.size(); ++i) run_phase(cfg.plan[i], i, stream, state, cfg, ctx);
    TrainingResult out;
    out.manifest = make_manifest(state, cfg, ctx, data_digest(stream));
    out.history = state.history;
    if (!ctx.run_dir.empty()) {
        out.final_checkpoint = ctx.run_dir / "checkpoints" / "final";
        model::save_checkpoint(out.final_checkpoint, out.manifest, adapter, base.decoder);
        write_loss_csv(ctx.run_dir / "loss.csv", state.history);
    }
    return out;
}

// ---- base model ------------------------------------------------------------------

BaseModel pretrain_base(std::span<const std::string> texts, const PretrainConfig& cfg, const std::string& id,
                        const std::function<void(std::size_t, double)>& on_step) {
    if (texts.empty()) throw ValidationError("pretraining needs at least one text");
    std::vector<std::string> corpus(texts.begin(), texts.end());
    corpus.push_back(cfg.chat_instruction);
    model::Tokenizer tok = model::Tokenizer::build(corpus, cfg.vocab_size, cfg.min_count);
    model::DecoderConfig dcfg = cfg.decoder;
    dcfg.vocab_size = tok.size();
    Rng rng(derive_seed(cfg.seed, "base.init"));
    BaseModel base{id, std::move(tok), model::DecoderModel(dcfg, rng)};
    base.decoder.set_trainable(true, false, true);
    std::vector<Param*> params = base.decoder.dense_params();
    AdamW opt(params, 0.9, 0.999, 1e-8, 0.0);
    Rng pick(derive_seed(cfg.seed, "base.batches"));
    const std::vector<int> chat_prefix = base.tokenizer.encode(model::apply_chat_template(cfg.chat_instruction));
    const auto warmup = static_cast<std::size_t>(std::ceil(0.03 * static_cast<double>(cfg.steps)));
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        std::vector<std::pair<std::vector<int>, std::vector<int>>> batch;
        std::size_t tokens = 0;
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            const auto& text = texts[pick.below(texts.size())];
            std::vector<int> ids;
            std::size_t first_label = 0;
            if (pick.uniform() < cfg.chat_fraction) {
                ids = chat_prefix;
                first_label = ids.size() - 1;
                for (int t : base.tokenizer.encode(text)) ids.push_back(t);
                ids.push_back(base.tokenizer.end_id());
            } else {
                ids.push_back(base.tokenizer.bos_id());
                for (int t : base.tokenizer.encode(text)) ids.push_back(t);
                ids.push_back(base.tokenizer.eos_id());
            }
            if (ids.size() > dcfg.max_seq_len) ids.resize(dcfg.max_seq_len);
            std::vector<int> labels(ids.size(), -1);
            for (std::size_t t = first_label; t + 1 < ids.size(); ++t) labels[t] = ids[t + 1];
            tokens += ids.size() - 1 - first_label;
            batch.emplace_back(std::move(ids), std::move(labels));
        }
        double nll = 0.0;
        for (auto& [ids, labels] : batch) {
            const Matrix x = base.decoder.embed_tokens(ids);
            Matrix dx;
            const auto r = base.decoder.forward_backward(x, labels, 1.0 / static_cast<double>(tokens), {}, &dx);
            nll += r.nll_sum;
            Param& emb = base.decoder.token_embedding();
            for (std::size_t t = 0; t < ids.size(); ++t)
                simd::axpy(1.0, dx.row(t), emb.grad_row(static_cast<std::size_t>(ids[t])));
        }
        clip_grad_norm(params, 1.0);
        opt.step(linear_schedule(cfg.learning_rate, step, warmup, cfg.steps));
        for (Param* p : params) p->zero_grad();
        if (on_step) on_step(step + 1, nll / static_cast<double>(tokens));
    }
    base.decoder.set_trainable(false, false, false);
    return base;
}

}  // namespace elm::training
