#include "elm/model/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "elm/common/error.hpp"
#include "elm/common/rng.hpp"
#include "elm/model/blob.hpp"

namespace elm::model {

namespace {

using nlohmann::json;

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const json& j) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

json config_to_json(const DecoderConfig& c) {
    return {{"vocab_size", c.vocab_size}, {"d_model", c.d_model},         {"n_layers", c.n_layers},
            {"n_heads", c.n_heads},       {"d_ff", c.d_ff},               {"max_seq_len", c.max_seq_len},
            {"norm_eps", c.norm_eps}};
}

DecoderConfig config_from_json(const json& j) {
    DecoderConfig c;
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.d_model = j.at("d_model").get<std::size_t>();
    c.n_layers = j.at("n_layers").get<std::size_t>();
    c.n_heads = j.at("n_heads").get<std::size_t>();
    c.d_ff = j.at("d_ff").get<std::size_t>();
    c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
    c.norm_eps = j.at("norm_eps").get<double>();
    return c;
}

std::vector<const Param*> all_const(const DecoderModel& m) { return m.dense_params(); }

}  // namespace

void save_base_model(const std::filesystem::path& dir, const BaseModel& base) {
    json j{{"id", base.id}, {"config", config_to_json(base.decoder.config())}, {"vocabulary", base.tokenizer.tokens()}};
    write_json(dir / "base.json", j);
    const auto params = all_const(base.decoder);
    write_blob(dir / "weights.bin", params);
}

BaseModel load_base_model(const std::filesystem::path& dir) {
    const json j = read_json(dir / "base.json");
    try {
        BaseModel base{j.at("id").get<std::string>(),
                       Tokenizer::from_tokens(j.at("vocabulary").get<std::vector<std::string>>()),
                       DecoderModel(config_from_json(j.at("config")))};
        if (base.tokenizer.size() != base.decoder.config().vocab_size)
            throw Error("base model vocabulary size does not match its config");
        const auto params = base.decoder.dense_params();
        load_blob_into(dir / "weights.bin", params);
        return base;
    } catch (const json::exception& e) {
        throw Error((dir / "base.json").string() + ": " + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& dir, const CheckpointManifest& m, const AdapterParams& adapter,
                     const DecoderModel& decoder) {
    json j;
    j["base_model_id"] = m.base_model_id;
    j["base_model_path"] = m.base_model_path;
    j["adapter"] = {{"d_emb", m.d_emb},
                    {"hidden", m.hidden},
                    {"d_base", m.d_base},
                    {"activation", activation_name(m.activation)}};
    if (m.low_rank) {
        j["low_rank"] = {{"rank", m.low_rank->rank},
                         {"alpha", m.low_rank->alpha},
                         {"dropout", m.low_rank->dropout},
                         {"target_projections", m.low_rank->target_projections}};
    } else {
        j["low_rank"] = nullptr;
    }
    j["training_run_id"] = m.training_run_id;
    j["data_digest"] = m.data_digest;
    j["phase_history"] = json::array();
    for (const auto& p : m.phase_history)
        j["phase_history"].push_back({{"name", p.name},
                                      {"trainable", p.trainable},
                                      {"steps", p.steps},
                                      {"epochs", p.epochs},
                                      {"learning_rate", p.learning_rate},
                                      {"final_loss", p.final_loss}});
    std::filesystem::create_directories(dir);
    write_blob(dir / "adapter.bin", adapter.params());
    if (m.low_rank) write_blob(dir / "lora.bin", decoder.lora_params());
    write_json(dir / "manifest.json", j);
}

ElmCheckpoint load_checkpoint(const std::filesystem::path& dir, const std::filesystem::path& base_override) {
    const json j = read_json(dir / "manifest.json");
    CheckpointManifest m;
    try {
        m.base_model_id = j.at("base_model_id").get<std::string>();
        m.base_model_path = j.value("base_model_path", "");
        const auto& a = j.at("adapter");
        m.d_emb = a.at("d_emb").get<std::size_t>();
        m.hidden = a.at("hidden").get<std::size_t>();
        m.d_base = a.at("d_base").get<std::size_t>();
        m.activation = parse_activation(a.at("activation").get<std::string>());
        if (j.contains("low_rank") && !j["low_rank"].is_null()) {
            LoraSpec s;
            const auto& l = j["low_rank"];
            s.rank = l.at("rank").get<std::size_t>();
            s.alpha = l.at("alpha").get<double>();
            s.dropout = l.at("dropout").get<double>();
            s.target_projections = l.at("target_projections").get<std::vector<std::string>>();
            m.low_rank = s;
        }
        m.training_run_id = j.value("training_run_id", "");
        m.data_digest = j.value("data_digest", "");
        for (const auto& p : j.value("phase_history", json::array()))
            m.phase_history.push_back({p.at("name").get<std::string>(), p.value("trainable", ""),
                                       p.value("steps", std::size_t{0}), p.value("epochs", std::size_t{0}),
                                       p.value("learning_rate", 0.0), p.value("final_loss", 0.0)});
    } catch (const json::exception& e) {
        throw Error((dir / "manifest.json").string() + ": " + e.what());
    }
    std::filesystem::path base_dir = base_override.empty() ? std::filesystem::path(m.base_model_path) : base_override;
    if (base_dir.is_relative() && base_override.empty()) base_dir = dir / base_dir;
    BaseModel base = load_base_model(base_dir);
    if (base.id != m.base_model_id)
        throw ValidationError("checkpoint expects base model '" + m.base_model_id + "' but " + base_dir.string() +
                              " holds '" + base.id + "'");
    if (m.d_base != base.decoder.config().d_model) throw ValidationError("checkpoint adapter width does not match base model");
    AdapterParams adapter = make_adapter(m.d_emb, m.hidden, m.d_base, m.activation);
    {
        auto ps = adapter.params();
        load_blob_into(dir / "adapter.bin", ps);
    }
    if (m.low_rank) {
        Rng rng(0);
        base.decoder.add_lora(*m.low_rank, rng);
        auto ps = base.decoder.lora_params();
        load_blob_into(dir / "lora.bin", ps);
    }
    adapter.validate();
    return ElmCheckpoint{std::move(m), std::move(base), std::move(adapter)};
}

}  // namespace elm::model
