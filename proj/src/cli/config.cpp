#include "elm/cli/config.hpp"

#include <cmath>
#include <cstdlib>
#include <functional>
#include <fstream>
#include <regex>

#include "elm/common/error.hpp"
#include "elm/common/text.hpp"

namespace elm::cli {

using nlohmann::json;

namespace {

json retry_json(const RetryPolicy& r) { return {{"count", r.count}, {"backoff_ms", r.backoff_ms}}; }

json client_json(const std::string& api_key_env) {
    llm::ClientConfig c;
    return {{"kind", c.kind},
            {"model_id", "gpt-4o-2024-11-20"},
            {"endpoint", c.endpoint},
            {"api_key_env", api_key_env},
            {"max_parallel", c.max_parallel},
            {"requests_per_second", c.requests_per_second},
            {"timeout_ms", c.timeout_ms},
            {"retry", retry_json(c.retry)}};
}

}  // namespace

json default_config() {
    embedding::BackendConfig e;
    training::TrainConfig t;
    model::LoraSpec l;
    tasks::UmapConfig u;
    training::PretrainConfig b;
    json alphas = json::array();
    for (int k = -5; k <= 5; ++k) alphas.push_back(0.25 * k);
    return {
        {"seed", 42},
        {"run_root", "runs"},
        {"cache_dir", "cache"},
        {"embedding",
         {{"backend_id", e.backend_id},
          {"kind", e.kind},
          {"endpoint", e.endpoint},
          {"model_path", e.model_path},
          {"api_key_env", e.api_key_env},
          {"dim", e.dim},
          {"max_tokens", e.max_tokens},
          {"batch_size", e.batch_size},
          {"max_parallel", e.max_parallel},
          {"timeout_ms", e.timeout_ms},
          {"retry", retry_json(e.retry)}}},
        {"oracle", client_json("ORACLE_API_KEY")},
        {"judge", client_json("JUDGE_API_KEY")},
        {"topics",
         {{"n_neighbors", u.n_neighbors},
          {"n_components", u.n_components},
          {"min_dist", u.min_dist},
          {"metric", u.metric},
          {"n_epochs", u.n_epochs},
          {"min_cluster_sizes", json::array({250})}}},
        {"data", {{"pair_fraction", 0.634}, {"n_same", 0}, {"n_different", 0}}},
        {"training",
         {{"plan", "1P-1E"},
          {"adapter_lr", 1e-3},
          {"joint_lr", 5e-5},
          {"batch_size", t.batch_size},
          {"grad_accum", t.grad_accum},
          {"max_seq_len", t.max_seq_len},
          {"max_grad_norm", t.max_grad_norm},
          {"precision", t.precision},
          {"warmup_fraction", t.warmup_fraction},
          {"weight_decay", t.weight_decay},
          {"beta1", t.beta1},
          {"beta2", t.beta2},
          {"adam_eps", t.adam_eps},
          {"checkpoint_every", t.checkpoint_every},
          {"adapter_hidden", t.adapter_hidden},
          {"adapter_activation", "relu"}}},
        {"lora",
         {{"rank", l.rank},
          {"alpha", l.alpha},
          {"dropout", l.dropout},
          {"target_projections", l.target_projections},
          {"bias", l.bias}}},
        {"generation",
         {{"temperature", 1.0},
          {"max_new_tokens", 256},
          {"penalty_scope", "prompt_and_generated"},
          {"repetition_penalty", 0.0}}},
        {"evaluation", {{"n_seeds", 5}, {"max_parallel", 1}, {"interp_pairs", 100}}},
        {"cav", {{"C", 1.0}, {"alphas", alphas}, {"balance_tolerance", 0.1}, {"positive_class", ""}}},
        {"base",
         {{"vocab_size", b.vocab_size},
          {"min_count", b.min_count},
          {"d_model", b.decoder.d_model},
          {"n_layers", b.decoder.n_layers},
          {"n_heads", b.decoder.n_heads},
          {"d_ff", b.decoder.d_ff},
          {"max_seq_len", b.decoder.max_seq_len},
          {"steps", b.steps},
          {"batch_size", b.batch_size},
          {"learning_rate", b.learning_rate},
          {"chat_fraction", b.chat_fraction}}},
    };
}

namespace {

std::string type_name(const json& j) {
    if (j.is_number()) return "number";
    return j.type_name();
}

bool same_kind(const json& def, const json& v) {
    if (def.is_number()) return v.is_number();
    return def.type() == v.type();
}

void merge_into(json& base, const json& user, const std::string& prefix) {
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!base.contains(it.key())) throw ValidationError("unknown config key '" + key + "'");
        json& slot = base[it.key()];
        if (!same_kind(slot, it.value()))
            throw ValidationError("config key '" + key + "' must be a " + type_name(slot) + ", got " +
                                  type_name(it.value()));
        if (slot.is_object())
            merge_into(slot, it.value(), key);
        else
            slot = it.value();
    }
}

}  // namespace

json merge_config(const json& user) {
    json base = default_config();
    if (user.is_null()) return base;
    if (!user.is_object()) throw ValidationError("config root must be an object");
    merge_into(base, user, "");
    return base;
}

json interpolate_env(const json& tree) {
    static const std::regex var(R"(\$\{([A-Za-z_][A-Za-z0-9_]*)\})");
    std::function<json(const json&, const std::string&)> walk = [&](const json& j, const std::string& path) -> json {
        if (j.is_object()) {
            json out = json::object();
            for (auto it = j.begin(); it != j.end(); ++it)
                out[it.key()] = walk(it.value(), path.empty() ? it.key() : path + "." + it.key());
            return out;
        }
        if (j.is_array()) {
            json out = json::array();
            for (std::size_t i = 0; i < j.size(); ++i) out.push_back(walk(j[i], path + "[" + std::to_string(i) + "]"));
            return out;
        }
        if (!j.is_string()) return j;
        const std::string s = j.get<std::string>();
        std::string out;
        std::size_t last = 0;
        for (std::sregex_iterator m(s.begin(), s.end(), var), end; m != end; ++m) {
            const std::string name = (*m)[1];
            const char* value = std::getenv(name.c_str());
            if (!value) throw ValidationError("config key '" + path + "' references unset environment variable " + name);
            out += s.substr(last, static_cast<std::size_t>(m->position()) - last) + value;
            last = static_cast<std::size_t>(m->position() + m->length());
        }
        return out + s.substr(last);
    };
    return walk(tree, "");
}

json redact_secrets(const json& tree) {
    if (tree.is_object()) {
        json out = json::object();
        for (auto it = tree.begin(); it != tree.end(); ++it) {
            const std::string k = text::lowercase(it.key());
            const bool secret = (k.find("key") != std::string::npos && k.find("env") == std::string::npos) ||
                                k.find("secret") != std::string::npos || k.find("token") != std::string::npos ||
                                k.find("password") != std::string::npos;
            out[it.key()] = secret && it.value().is_string() && !it.value().get<std::string>().empty()
                                ? json("***")
                                : redact_secrets(it.value());
        }
        return out;
    }
    if (tree.is_array()) {
        json out = json::array();
        for (const auto& v : tree) out.push_back(redact_secrets(v));
        return out;
    }
    return tree;
}

namespace {

// Typed accessors that name the key and constraint on failure.
class Reader {
public:
    explicit Reader(const json& root) : root_(root) {}

    const json& at(const std::string& path) const {
        const json* j = &root_;
        std::size_t start = 0;
        while (true) {
            const auto dot = path.find('.', start);
            j = &j->at(path.substr(start, dot - start));
            if (dot == std::string::npos) break;
            start = dot + 1;
        }
        return *j;
    }
    double number(const std::string& path) const { return at(path).get<double>(); }
    std::string str(const std::string& path) const { return at(path).get<std::string>(); }

    std::size_t count(const std::string& path, std::size_t min = 0) const {
        const json& j = at(path);
        if (!j.is_number_integer() && !(j.is_number() && std::floor(j.get<double>()) == j.get<double>()))
            fail(path, "an integer");
        const double v = j.get<double>();
        if (v < static_cast<double>(min)) fail(path, ">= " + std::to_string(min));
        return static_cast<std::size_t>(v);
    }
    double positive(const std::string& path) const {
        const double v = number(path);
        if (!(v > 0.0) || !std::isfinite(v)) fail(path, "> 0");
        return v;
    }
    double non_negative(const std::string& path) const {
        const double v = number(path);
        if (!(v >= 0.0) || !std::isfinite(v)) fail(path, ">= 0");
        return v;
    }
    double unit_open(const std::string& path) const {
        const double v = number(path);
        if (!(v >= 0.0 && v < 1.0)) fail(path, "in [0, 1)");
        return v;
    }
    std::string one_of(const std::string& path, const std::vector<std::string>& allowed) const {
        const std::string v = str(path);
        for (const auto& a : allowed)
            if (a == v) return v;
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        fail(path, "one of {" + list + "}");
        return v;
    }
    RetryPolicy retry(const std::string& path) const {
        return {static_cast<int>(count(path + ".count")), static_cast<int>(count(path + ".backoff_ms"))};
    }
    [[noreturn]] static void fail(const std::string& path, const std::string& constraint) {
        throw ValidationError("config key '" + path + "' must be " + constraint);
    }

private:
    const json& root_;
};

llm::ClientConfig read_client(const Reader& r, const std::string& p) {
    llm::ClientConfig c;
    c.kind = r.one_of(p + ".kind", {"http", "rule"});
    c.model_id = r.str(p + ".model_id");
    if (c.model_id.empty()) Reader::fail(p + ".model_id", "non-empty");
    c.endpoint = r.str(p + ".endpoint");
    c.api_key_env = r.str(p + ".api_key_env");
    c.max_parallel = r.count(p + ".max_parallel", 1);
    c.requests_per_second = r.non_negative(p + ".requests_per_second");
    c.timeout_ms = static_cast<int>(r.count(p + ".timeout_ms", 1));
    c.retry = r.retry(p + ".retry");
    return c;
}

}  // namespace

AppConfig build_config(const json& merged) {
    const json tree = interpolate_env(merged);
    const Reader r(tree);
    AppConfig c;
    c.resolved = merged;
    c.seed = static_cast<std::uint64_t>(r.count("seed"));
    c.run_root = r.str("run_root");
    c.cache_dir = r.str("cache_dir");

    auto& e = c.embedding;
    e.backend_id = r.str("embedding.backend_id");
    if (e.backend_id.empty()) Reader::fail("embedding.backend_id", "non-empty");
    e.kind = r.one_of("embedding.kind", {"http", "hashing"});
    e.endpoint = r.str("embedding.endpoint");
    e.model_path = r.str("embedding.model_path");
    e.api_key_env = r.str("embedding.api_key_env");
    e.dim = r.count("embedding.dim", 1);
    e.max_tokens = r.count("embedding.max_tokens", 1);
    e.batch_size = r.count("embedding.batch_size", 1);
    e.max_parallel = r.count("embedding.max_parallel", 1);
    e.timeout_ms = static_cast<int>(r.count("embedding.timeout_ms", 1));
    e.retry = r.retry("embedding.retry");

    c.oracle = read_client(r, "oracle");
    c.judge = read_client(r, "judge");

    c.umap.n_neighbors = r.count("topics.n_neighbors", 2);
    c.umap.n_components = r.count("topics.n_components", 1);
    c.umap.min_dist = r.non_negative("topics.min_dist");
    c.umap.metric = r.one_of("topics.metric", {"cosine", "euclidean"});
    c.umap.n_epochs = r.count("topics.n_epochs");
    c.umap.seed = c.seed;
    for (std::size_t i = 0; i < r.at("topics.min_cluster_sizes").size(); ++i) {
        const json& v = r.at("topics.min_cluster_sizes")[i];
        if (!v.is_number_integer() || v.get<long long>() < 2)
            Reader::fail("topics.min_cluster_sizes[" + std::to_string(i) + "]", "an integer >= 2");
        c.min_cluster_sizes.push_back(v.get<std::size_t>());
    }
    if (c.min_cluster_sizes.empty()) Reader::fail("topics.min_cluster_sizes", "non-empty");

    c.data.pair_fraction = r.non_negative("data.pair_fraction");
    c.data.n_same = r.count("data.n_same");
    c.data.n_different = r.count("data.n_different");

    auto& t = c.training;
    c.plan_name = r.str("training.plan");
    c.adapter_lr = r.positive("training.adapter_lr");
    c.joint_lr = r.positive("training.joint_lr");
    try {
        t.plan = training::parse_plan(c.plan_name, c.adapter_lr, c.joint_lr);
    } catch (const ValidationError& ex) {
        throw ValidationError("config key 'training.plan': " + std::string(ex.what()));
    }
    t.seed = c.seed;
    t.batch_size = r.count("training.batch_size", 1);
    t.grad_accum = r.count("training.grad_accum", 1);
    t.max_seq_len = r.count("training.max_seq_len", 2);
    t.max_grad_norm = r.positive("training.max_grad_norm");
    t.precision = r.one_of("training.precision", {"bf16-mixed", "fp32", "fp64"});
    t.warmup_fraction = r.unit_open("training.warmup_fraction");
    t.weight_decay = r.non_negative("training.weight_decay");
    t.beta1 = r.unit_open("training.beta1");
    t.beta2 = r.unit_open("training.beta2");
    t.adam_eps = r.positive("training.adam_eps");
    t.checkpoint_every = r.count("training.checkpoint_every");
    t.adapter_hidden = r.count("training.adapter_hidden", 1);
    t.adapter_activation = model::parse_activation(r.one_of("training.adapter_activation", {"relu", "gelu"}));

    auto& l = t.lora;
    l.rank = r.count("lora.rank", 1);
    l.alpha = r.positive("lora.alpha");
    l.dropout = r.unit_open("lora.dropout");
    l.target_projections.clear();
    for (const auto& p : r.at("lora.target_projections")) {
        if (!p.is_string()) Reader::fail("lora.target_projections", "a list of strings");
        const auto s = p.get<std::string>();
        if (s != "query" && s != "key" && s != "value" && s != "output")
            Reader::fail("lora.target_projections", "a subset of {query, key, value, output}");
        l.target_projections.push_back(s);
    }
    if (l.target_projections.empty()) Reader::fail("lora.target_projections", "non-empty");
    l.bias = r.one_of("lora.bias", {"none"});

    c.generation.temperature = r.positive("generation.temperature");
    c.generation.max_new_tokens = r.count("generation.max_new_tokens");
    c.generation.penalty_scope =
        model::parse_penalty_scope(r.one_of("generation.penalty_scope", {"prompt_and_generated", "generated_only"}));
    c.generation.repetition_penalty = r.non_negative("generation.repetition_penalty");
    if (c.generation.repetition_penalty != 0.0 && c.generation.repetition_penalty < 1.0)
        Reader::fail("generation.repetition_penalty", "0 (per-task default) or >= 1");

    c.evaluation.n_seeds = r.count("evaluation.n_seeds", 1);
    c.evaluation.max_parallel = r.count("evaluation.max_parallel", 1);
    c.evaluation.interp_pairs = r.count("evaluation.interp_pairs", 1);

    c.cav.svm.C = r.positive("cav.C");
    for (const auto& a : r.at("cav.alphas")) {
        if (!a.is_number()) Reader::fail("cav.alphas", "a list of numbers");
        c.cav.alphas.push_back(a.get<double>());
    }
    if (c.cav.alphas.empty()) Reader::fail("cav.alphas", "non-empty");
    for (std::size_t i = 1; i < c.cav.alphas.size(); ++i)
        if (!(c.cav.alphas[i] > c.cav.alphas[i - 1])) Reader::fail("cav.alphas", "strictly increasing");
    c.cav.balance_tolerance = r.non_negative("cav.balance_tolerance");
    c.cav.positive_class = r.str("cav.positive_class");

    auto& b = c.base;
    b.vocab_size = r.count("base.vocab_size", 16);
    b.min_count = r.count("base.min_count", 1);
    b.decoder.d_model = r.count("base.d_model", 1);
    b.decoder.n_layers = r.count("base.n_layers", 1);
    b.decoder.n_heads = r.count("base.n_heads", 1);
    b.decoder.d_ff = r.count("base.d_ff", 1);
    b.decoder.max_seq_len = r.count("base.max_seq_len", 2);
    if (b.decoder.d_model % b.decoder.n_heads != 0) Reader::fail("base.n_heads", "a divisor of base.d_model");
    b.steps = r.count("base.steps", 1);
    b.batch_size = r.count("base.batch_size", 1);
    b.learning_rate = r.positive("base.learning_rate");
    b.chat_fraction = r.number("base.chat_fraction");
    if (!(b.chat_fraction >= 0.0 && b.chat_fraction <= 1.0)) Reader::fail("base.chat_fraction", "in [0, 1]");
    b.seed = c.seed;

    t.validate();
    return c;
}

AppConfig load_config(const std::filesystem::path& path) {
    json user = json::object();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ValidationError("cannot read config file " + path.string());
        try {
            user = json::parse(in, nullptr, true, true);
        } catch (const json::exception& e) {
            throw ValidationError(path.string() + ": " + e.what());
        }
    }
    return build_config(merge_config(user));
}

}  // namespace elm::cli
