#include "elm/model/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "elm/common/error.hpp"
#include "elm/simd/kernels.hpp"
#include "activations.hpp"

namespace elm::model {

namespace {

using detail::gelu;
using detail::gelu_grad;

void fill_normal(Param& p, double stddev, Rng& rng) {
    for (double& v : p.value) v = stddev * rng.normal();
}

void fill_value(Param& p, double v) { std::fill(p.value.begin(), p.value.end(), v); }

// y = x * inv_rms * g, one row at a time
void rms_forward(const Matrix& x, const Param& g, double eps, Matrix& y, std::vector<double>& inv_r) {
    const std::size_t d = x.cols;
    y = Matrix(x.rows, d);
    inv_r.assign(x.rows, 0.0);
    for (std::size_t t = 0; t < x.rows; ++t) {
        const double ir = 1.0 / std::sqrt(simd::sum_squares(x.row(t)) / static_cast<double>(d) + eps);
        inv_r[t] = ir;
        const auto xr = x.row(t);
        auto yr = y.row(t);
        for (std::size_t j = 0; j < d; ++j) yr[j] = xr[j] * ir * g.value[j];
    }
}

void rms_row(std::span<const double> x, const Param& g, double eps, std::span<double> y) {
    const double ir = 1.0 / std::sqrt(simd::sum_squares(x) / static_cast<double>(x.size()) + eps);
    for (std::size_t j = 0; j < x.size(); ++j) y[j] = x[j] * ir * g.value[j];
}

void rms_backward(const Matrix& dy, const Matrix& x, Param& g, const std::vector<double>& inv_r, Matrix& dx) {
    const std::size_t d = x.cols;
    std::vector<double> gy(d);
    for (std::size_t t = 0; t < x.rows; ++t) {
        const auto xr = x.row(t);
        const auto dyr = dy.row(t);
        const double ir = inv_r[t];
        if (g.trainable)
            for (std::size_t j = 0; j < d; ++j) g.grad[j] += dyr[j] * xr[j] * ir;
        for (std::size_t j = 0; j < d; ++j) gy[j] = dyr[j] * g.value[j];
        const double proj = simd::dot(gy, xr) / static_cast<double>(d);
        auto dxr = dx.row(t);
        for (std::size_t j = 0; j < d; ++j) dxr[j] += ir * gy[j] - xr[j] * ir * ir * ir * proj;
    }
}

struct ProjCache {
    Matrix x_drop;                // dropped input, only with dropout
    std::vector<double> keep;     // 0 or 1/(1-p)
    Matrix u;                     // x_drop A^T
    bool dropped = false;
};

Matrix proj_forward(const Projection& p, const Matrix& x, const PassOptions& opt, ProjCache* cache) {
    Matrix y = linear(x, p.weight);
    if (!p.lora) return y;
    const bool drop = opt.training && p.lora_dropout > 0.0;
    Matrix u;
    ProjCache local;
    ProjCache& c = cache ? *cache : local;
    c.dropped = drop;
    if (drop) {
        if (!opt.rng) throw Error("training pass with LoRA dropout needs a random generator");
        const double keep_scale = 1.0 / (1.0 - p.lora_dropout);
        c.keep.assign(x.data.size(), 0.0);
        c.x_drop = Matrix(x.rows, x.cols);
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            if (opt.rng->uniform() >= p.lora_dropout) c.keep[i] = keep_scale;
            c.x_drop.data[i] = x.data[i] * c.keep[i];
        }
        u = linear(c.x_drop, p.lora->a);
    } else {
        u = linear(x, p.lora->a);
    }
    Matrix delta = linear(u, p.lora->b);
    simd::axpy(p.lora_scale, delta.data, y.data);
    c.u = std::move(u);
    return y;
}

void proj_backward(Projection& p, const Matrix& x, const ProjCache& c, const Matrix& dy, Matrix& dx) {
    linear_backward_weight(dy, x, p.weight);
    linear_backward_input(dy, p.weight, dx);
    if (!p.lora) return;
    Matrix scaled = dy;
    simd::scale(scaled.data, p.lora_scale);
    linear_backward_weight(scaled, c.u, p.lora->b);
    Matrix du(dy.rows, p.lora->a.rows());
    linear_backward_input(scaled, p.lora->b, du);
    const Matrix& xin = c.dropped ? c.x_drop : x;
    linear_backward_weight(du, xin, p.lora->a);
    Matrix dxd(x.rows, x.cols);
    linear_backward_input(du, p.lora->a, dxd);
    if (c.dropped)
        for (std::size_t i = 0; i < dxd.data.size(); ++i) dxd.data[i] *= c.keep[i];
    simd::axpy(1.0, dxd.data, dx.data);
}

void proj_row(const Projection& p, std::span<const double> x, std::span<double> y) {
    const auto& k = simd::active();
    k.matvec(p.weight.value.data(), x.data(), y.data(), p.weight.rows(), p.weight.cols());
    if (!p.lora) return;
    std::vector<double> u(p.lora->a.rows());
    std::vector<double> delta(p.lora->b.rows());
    k.matvec(p.lora->a.value.data(), x.data(), u.data(), p.lora->a.rows(), p.lora->a.cols());
    k.matvec(p.lora->b.value.data(), u.data(), delta.data(), p.lora->b.rows(), p.lora->b.cols());
    k.axpy(p.lora_scale, delta.data(), y.data(), y.size());
}

struct LayerCache {
    Matrix x_in;
    std::vector<double> r1;
    Matrix a;
    ProjCache pq, pk, pv, po;
    Matrix q, k, v;
    std::vector<Matrix> probs;  // per head, T x T (lower triangle used)
    Matrix o;
    Matrix x_mid;
    std::vector<double> r2;
    Matrix b;
    Matrix h_pre;
    Matrix h_act;
};

void softmax_inplace(std::span<double> x) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : x) mx = std::max(mx, v);
    double total = 0.0;
    for (double& v : x) {
        v = std::exp(v - mx);
        total += v;
    }
    for (double& v : x) v /= total;
}

}  // namespace

void DecoderConfig::validate() const {
    if (vocab_size == 0) throw ValidationError("decoder vocab_size must be positive");
    if (d_model == 0 || n_layers == 0 || n_heads == 0 || d_ff == 0 || max_seq_len == 0)
        throw ValidationError("decoder sizes must be positive");
    if (d_model % n_heads != 0) throw ValidationError("d_model must be divisible by n_heads");
    if (!(norm_eps > 0.0)) throw ValidationError("norm_eps must be positive");
}

void LoraSpec::validate() const {
    if (rank == 0) throw ValidationError("lora rank must be positive");
    if (!(alpha > 0.0)) throw ValidationError("lora alpha must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("lora dropout must be in [0, 1)");
    if (bias != "none") throw ValidationError("lora bias '" + bias + "' is not supported (only none)");
    if (target_projections.empty()) throw ValidationError("lora target_projections is empty");
    for (const auto& t : target_projections)
        if (t != "query" && t != "key" && t != "value" && t != "output")
            throw ValidationError("unknown lora target projection '" + t + "'");
}

DecoderModel::DecoderModel(DecoderConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    allocate();
    fill_value(final_norm_, 1.0);
    for (auto& l : layers_) {
        fill_value(l.attn_norm, 1.0);
        fill_value(l.mlp_norm, 1.0);
    }
}

DecoderModel::DecoderModel(DecoderConfig cfg, Rng& rng) : DecoderModel(cfg) {
    const double s = 0.02;
    const double s_out = s / std::sqrt(2.0 * static_cast<double>(cfg_.n_layers));
    fill_normal(tok_emb_, s, rng);
    fill_normal(pos_emb_, s, rng);
    for (auto& l : layers_) {
        fill_normal(l.wq.weight, s, rng);
        fill_normal(l.wk.weight, s, rng);
        fill_normal(l.wv.weight, s, rng);
        fill_normal(l.wo.weight, s_out, rng);
        fill_normal(l.w_up, s, rng);
        fill_normal(l.w_down, s_out, rng);
    }
    fill_normal(lm_head_, s, rng);
}

void DecoderModel::allocate() {
    const std::size_t d = cfg_.d_model;
    tok_emb_ = Param("tok_emb", {cfg_.vocab_size, d});
    pos_emb_ = Param("pos_emb", {cfg_.max_seq_len, d});
    layers_.clear();
    for (std::size_t i = 0; i < cfg_.n_layers; ++i) {
        const std::string p = "layers." + std::to_string(i) + ".";
        DecoderLayer l;
        l.attn_norm = Param(p + "attn_norm", {d});
        l.wq.weight = Param(p + "wq", {d, d});
        l.wk.weight = Param(p + "wk", {d, d});
        l.wv.weight = Param(p + "wv", {d, d});
        l.wo.weight = Param(p + "wo", {d, d});
        l.mlp_norm = Param(p + "mlp_norm", {d});
        l.w_up = Param(p + "w_up", {cfg_.d_ff, d});
        l.w_down = Param(p + "w_down", {d, cfg_.d_ff});
        layers_.push_back(std::move(l));
    }
    final_norm_ = Param("final_norm", {d});
    lm_head_ = Param("lm_head", {cfg_.vocab_size, d});
}

void DecoderModel::add_lora(const LoraSpec& spec, Rng& rng) {
    spec.validate();
    if (lora_spec_) throw Error("model already has LoRA factors");
    const std::size_t d = cfg_.d_model;
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        auto& l = layers_[i];
        for (const auto& target : spec.target_projections) {
            Projection* proj = target == "query" ? &l.wq : target == "key" ? &l.wk : target == "value" ? &l.wv : &l.wo;
            if (proj->lora) continue;
            const std::string base = proj->weight.name + ".lora_";
            LoraPair pair{Param(base + "a", {spec.rank, d}), Param(base + "b", {d, spec.rank})};
            for (double& v : pair.a.value) v = rng.uniform(-bound, bound);
            proj->lora = std::move(pair);
            proj->lora_scale = spec.scale();
            proj->lora_dropout = spec.dropout;
        }
    }
    lora_spec_ = spec;
}

std::vector<Param*> DecoderModel::dense_params() {
    std::vector<Param*> out{&tok_emb_, &pos_emb_};
    for (auto& l : layers_)
        for (Param* p : {&l.attn_norm, &l.wq.weight, &l.wk.weight, &l.wv.weight, &l.wo.weight, &l.mlp_norm, &l.w_up,
                         &l.w_down})
            out.push_back(p);
    out.push_back(&final_norm_);
    out.push_back(&lm_head_);
    return out;
}

std::vector<const Param*> DecoderModel::dense_params() const {
    auto ps = const_cast<DecoderModel*>(this)->dense_params();
    return {ps.begin(), ps.end()};
}

std::vector<Param*> DecoderModel::lora_params() {
    std::vector<Param*> out;
    for (auto& l : layers_)
        for (Projection* p : {&l.wq, &l.wk, &l.wv, &l.wo})
            if (p->lora) {
                out.push_back(&p->lora->a);
                out.push_back(&p->lora->b);
            }
    return out;
}

std::vector<const Param*> DecoderModel::lora_params() const {
    auto ps = const_cast<DecoderModel*>(this)->lora_params();
    return {ps.begin(), ps.end()};
}

void DecoderModel::set_trainable(bool dense, bool lora, bool train_token_embedding) {
    for (Param* p : dense_params()) p->trainable = dense;
    tok_emb_.trainable = train_token_embedding;
    for (Param* p : lora_params()) p->trainable = lora;
}

Matrix DecoderModel::embed_tokens(std::span<const int> ids) const {
    Matrix out(ids.size(), cfg_.d_model);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= cfg_.vocab_size)
            throw Error("token id " + std::to_string(ids[i]) + " is outside the vocabulary");
        const auto src = tok_emb_.row(static_cast<std::size_t>(ids[i]));
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

PassResult DecoderModel::forward_backward(const Matrix& inputs, std::span<const int> labels, double grad_scale,
                                          const PassOptions& opt, Matrix* d_inputs) {
    const std::size_t T = inputs.rows;
    const std::size_t D = cfg_.d_model;
    const std::size_t H = cfg_.n_heads;
    const std::size_t hd = D / H;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(hd));
    if (inputs.cols != D) throw Error("decoder input width does not match d_model");
    if (labels.size() != T) throw Error("labels and inputs differ in length");
    if (T == 0) return {};
    if (T > cfg_.max_seq_len)
        throw ValidationError("sequence of " + std::to_string(T) + " positions exceeds max_seq_len " +
                              std::to_string(cfg_.max_seq_len));
    const bool backward = grad_scale != 0.0;

    Matrix x = inputs;
    for (std::size_t t = 0; t < T; ++t) simd::axpy(1.0, pos_emb_.row(t), x.row(t));

    std::vector<LayerCache> caches(layers_.size());
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        auto& l = layers_[li];
        auto& c = caches[li];
        c.x_in = x;
        rms_forward(x, l.attn_norm, cfg_.norm_eps, c.a, c.r1);
        c.q = proj_forward(l.wq, c.a, opt, &c.pq);
        c.k = proj_forward(l.wk, c.a, opt, &c.pk);
        c.v = proj_forward(l.wv, c.a, opt, &c.pv);
        c.o = Matrix(T, D);
        c.probs.assign(H, Matrix(T, T));
        for (std::size_t h = 0; h < H; ++h) {
            const std::size_t off = h * hd;
            Matrix& P = c.probs[h];
            for (std::size_t t = 0; t < T; ++t) {
                auto pr = P.row(t).subspan(0, t + 1);
                for (std::size_t u = 0; u <= t; ++u)
                    pr[u] = att_scale * simd::dot(c.q.row(t).subspan(off, hd), c.k.row(u).subspan(off, hd));
                softmax_inplace(pr);
                auto orow = c.o.row(t).subspan(off, hd);
                for (std::size_t u = 0; u <= t; ++u) simd::axpy(pr[u], c.v.row(u).subspan(off, hd), orow);
            }
        }
        Matrix attn = proj_forward(l.wo, c.o, opt, &c.po);
        simd::axpy(1.0, attn.data, x.data);
        c.x_mid = x;
        rms_forward(x, l.mlp_norm, cfg_.norm_eps, c.b, c.r2);
        c.h_pre = linear(c.b, l.w_up);
        c.h_act = c.h_pre;
        for (double& v : c.h_act.data) v = gelu(v);
        Matrix mlp = linear(c.h_act, l.w_down);
        simd::axpy(1.0, mlp.data, x.data);
    }
    Matrix f;
    std::vector<double> rf;
    rms_forward(x, final_norm_, cfg_.norm_eps, f, rf);

    PassResult res;
    Matrix df(T, D);
    std::vector<double> logits(cfg_.vocab_size);
    const auto& k = simd::active();
    for (std::size_t t = 0; t < T; ++t) {
        if (labels[t] < 0) continue;
        const auto label = static_cast<std::size_t>(labels[t]);
        if (label >= cfg_.vocab_size) throw Error("label id outside the vocabulary");
        k.matvec(lm_head_.value.data(), f.row(t).data(), logits.data(), cfg_.vocab_size, D);
        double mx = -std::numeric_limits<double>::infinity();
        for (double v : logits) mx = std::max(mx, v);
        double total = 0.0;
        for (double& v : logits) {
            v = std::exp(v - mx);
            total += v;
        }
        res.nll_sum += -std::log(logits[label] / total);
        ++res.count;
        if (!backward) continue;
        for (double& v : logits) v = v / total * grad_scale;
        logits[label] -= grad_scale;
        auto dfr = df.row(t);
        for (std::size_t vi = 0; vi < cfg_.vocab_size; ++vi) {
            const double g = logits[vi];
            k.axpy(g, lm_head_.value.data() + vi * D, dfr.data(), D);
            if (lm_head_.trainable) k.axpy(g, f.row(t).data(), lm_head_.grad.data() + vi * D, D);
        }
    }
    if (!std::isfinite(res.nll_sum)) throw Error("decoder produced a non-finite loss");
    if (!backward) return res;

    Matrix dx(T, D);
    rms_backward(df, x, final_norm_, rf, dx);
    for (std::size_t li = layers_.size(); li-- > 0;) {
        auto& l = layers_[li];
        auto& c = caches[li];
        // MLP branch
        Matrix dh(T, cfg_.d_ff);
        linear_backward_weight(dx, c.h_act, l.w_down);
        linear_backward_input(dx, l.w_down, dh);
        for (std::size_t i = 0; i < dh.data.size(); ++i) dh.data[i] *= gelu_grad(c.h_pre.data[i]);
        linear_backward_weight(dh, c.b, l.w_up);
        Matrix db(T, D);
        linear_backward_input(dh, l.w_up, db);
        rms_backward(db, c.x_mid, l.mlp_norm, c.r2, dx);
        // attention branch
        Matrix d_o(T, D);
        proj_backward(l.wo, c.o, c.po, dx, d_o);
        Matrix dq(T, D), dk(T, D), dv(T, D);
        std::vector<double> dp(T);
        for (std::size_t h = 0; h < H; ++h) {
            const std::size_t off = h * hd;
            const Matrix& P = c.probs[h];
            for (std::size_t t = 0; t < T; ++t) {
                const auto pr = P.row(t);
                const auto dor = d_o.row(t).subspan(off, hd);
                double acc = 0.0;
                for (std::size_t u = 0; u <= t; ++u) {
                    dp[u] = simd::dot(dor, c.v.row(u).subspan(off, hd));
                    acc += pr[u] * dp[u];
                    simd::axpy(pr[u], dor, dv.row(u).subspan(off, hd));
                }
                for (std::size_t u = 0; u <= t; ++u) {
                    const double ds = pr[u] * (dp[u] - acc) * att_scale;
                    if (ds == 0.0) continue;
                    simd::axpy(ds, c.k.row(u).subspan(off, hd), dq.row(t).subspan(off, hd));
                    simd::axpy(ds, c.q.row(t).subspan(off, hd), dk.row(u).subspan(off, hd));
                }
            }
        }
        Matrix da(T, D);
        proj_backward(l.wq, c.a, c.pq, dq, da);
        proj_backward(l.wk, c.a, c.pk, dk, da);
        proj_backward(l.wv, c.a, c.pv, dv, da);
        rms_backward(da, c.x_in, l.attn_norm, c.r1, dx);
    }
    if (pos_emb_.trainable)
        for (std::size_t t = 0; t < T; ++t) simd::axpy(1.0, dx.row(t), pos_emb_.grad_row(t));
    if (d_inputs) {
        if (d_inputs->rows != T || d_inputs->cols != D) *d_inputs = Matrix(T, D);
        simd::axpy(1.0, dx.data, d_inputs->data);
    }
    return res;
}

Matrix DecoderModel::forward_logits(const Matrix& inputs) {
    Session s(*this);
    Matrix out(inputs.rows, cfg_.vocab_size);
    for (std::size_t t = 0; t < inputs.rows; ++t) {
        auto logits = s.step(inputs.row(t));
        std::copy(logits.begin(), logits.end(), out.row(t).begin());
    }
    return out;
}

DecoderModel::Session::Session(const DecoderModel& model)
    : model_(model), keys_(model.layers_.size()), values_(model.layers_.size()) {}

std::vector<double> DecoderModel::Session::step(std::span<const double> input) {
    const auto& cfg = model_.cfg_;
    const std::size_t D = cfg.d_model;
    const std::size_t H = cfg.n_heads;
    const std::size_t hd = D / H;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(hd));
    if (input.size() != D) throw Error("session input width does not match d_model");
    if (length_ >= cfg.max_seq_len) throw ValidationError("generation exceeded max_seq_len");
    const std::size_t t = length_;

    std::vector<double> x(input.begin(), input.end());
    simd::axpy(1.0, model_.pos_emb_.row(t), x);
    std::vector<double> a(D), q(D), kk(D), v(D), o(D), tmp(D), hb(cfg.d_ff), scores;
    const auto& kt = simd::active();
    for (std::size_t li = 0; li < model_.layers_.size(); ++li) {
        const auto& l = model_.layers_[li];
        rms_row(x, l.attn_norm, cfg.norm_eps, a);
        proj_row(l.wq, a, q);
        proj_row(l.wk, a, kk);
        proj_row(l.wv, a, v);
        auto& K = keys_[li];
        auto& V = values_[li];
        K.insert(K.end(), kk.begin(), kk.end());
        V.insert(V.end(), v.begin(), v.end());
        std::fill(o.begin(), o.end(), 0.0);
        scores.assign(t + 1, 0.0);
        for (std::size_t h = 0; h < H; ++h) {
            const std::size_t off = h * hd;
            for (std::size_t u = 0; u <= t; ++u)
                scores[u] = att_scale * kt.dot(q.data() + off, K.data() + u * D + off, hd);
            softmax_inplace(scores);
            for (std::size_t u = 0; u <= t; ++u) kt.axpy(scores[u], V.data() + u * D + off, o.data() + off, hd);
        }
        proj_row(l.wo, o, tmp);
        kt.axpy(1.0, tmp.data(), x.data(), D);
        rms_row(x, l.mlp_norm, cfg.norm_eps, a);
        kt.matvec(l.w_up.value.data(), a.data(), hb.data(), cfg.d_ff, D);
        for (double& e : hb) e = gelu(e);
        kt.matvec(l.w_down.value.data(), hb.data(), tmp.data(), D, cfg.d_ff);
        kt.axpy(1.0, tmp.data(), x.data(), D);
    }
    rms_row(x, model_.final_norm_, cfg.norm_eps, a);
    std::vector<double> logits(cfg.vocab_size);
    kt.matvec(model_.lm_head_.value.data(), a.data(), logits.data(), cfg.vocab_size, D);
    ++length_;
    return logits;
}

}  // namespace elm::model
