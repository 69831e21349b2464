#include "elm/eval/sc.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "elm/common/digest.hpp"
#include "elm/common/error.hpp"
#include "elm/common/parallel.hpp"
#include "elm/common/rng.hpp"
#include "elm/common/text.hpp"

namespace elm::eval {

using nlohmann::json;

TextGenerator checkpoint_generator(const model::ElmCheckpoint& checkpoint, model::GenerationConfig cfg) {
    cfg.validate();
    return [&checkpoint, cfg](const model::MixedPrompt& prompt, std::uint64_t seed) {
        model::GenerationConfig c = cfg;
        c.seed = seed;
        return model::generate(prompt, checkpoint.adapter, checkpoint.base.tokenizer, checkpoint.base.decoder, c);
    };
}

double default_repetition_penalty(tasks::TaskKind kind) { return kind == tasks::TaskKind::emb2abs ? 1.2 : 1.0; }

model::GenerationConfig default_generation_config(tasks::TaskKind kind, std::uint64_t seed) {
    model::GenerationConfig c;
    c.repetition_penalty = default_repetition_penalty(kind);
    c.seed = seed;
    return c;
}

EvalItem eval_item_from_instance(const tasks::TaskInstance& instance) {
    EvalItem item;
    for (const auto& s : instance.source_ids) item.id += (item.id.empty() ? "" : "+") + s;
    item.prompt = instance.prompt;
    item.target_text = instance.target;
    return item;
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double sum = 0.0;
    for (double x : xs) sum += x;
    const double mean = sum / static_cast<double>(xs.size());
    double sq = 0.0;
    for (double x : xs) sq += (x - mean) * (x - mean);
    return {mean, std::sqrt(sq / static_cast<double>(xs.size()))};
}

void SCReport::validate() const {
    if (n != scores.size()) throw ValidationError("SC report n does not match the number of scores");
    if (ids.size() != scores.size() || generations.size() != scores.size())
        throw ValidationError("SC report columns have different lengths");
    if (n > 0 && !(mean >= -1.0 - 1e-12 && mean <= 1.0 + 1e-12)) throw ValidationError("SC mean outside [-1, 1]");
}

void aggregate(SCReport& report) {
    report.n = report.scores.size();
    std::tie(report.mean, report.std) = mean_std(report.scores);
}

SCReport eval_sc(tasks::TaskKind task, const std::vector<EvalItem>& items, const TextGenerator& generate,
                 embedding::Embedder& embedder, const ScOptions& options, const std::string& config_digest) {
    std::vector<std::optional<double>> score(items.size());
    std::vector<std::string> text(items.size());
    auto failures = parallel_for(items.size(), options.max_parallel, [&](std::size_t i) {
        const auto& item = items[i];
        item.prompt.validate();
        text[i] = generate(item.prompt, derive_seed(options.seed, "sc." + std::to_string(i)));
        if (text::trim(text[i]).empty()) throw Error("generation produced no text");
        const auto target = item.target_vector ? *item.target_vector : embedder.embed(item.target_text);
        score[i] = embedding::semantic_consistency(text[i], target, embedder);
    });
    SCReport r;
    r.task = task;
    r.config_digest = config_digest.empty()
                          ? sha256_hex(tasks::task_name(task) + "|" + std::to_string(options.seed))
                          : config_digest;
    for (const auto& f : failures) {
        std::string msg = "unknown error";
        try {
            std::rethrow_exception(f.error);
        } catch (const std::exception& e) {
            msg = e.what();
        } catch (...) {
        }
        r.failures.push_back({f.index, items[f.index].id, msg});
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!score[i]) continue;
        r.ids.push_back(items[i].id);
        r.scores.push_back(*score[i]);
        r.generations.push_back(text[i]);
    }
    aggregate(r);
    r.validate();
    return r;
}

void write_sc_report(const std::filesystem::path& path, const SCReport& report) {
    json j;
    j["task"] = tasks::task_name(report.task);
    j["n"] = report.n;
    j["mean"] = report.mean;
    j["std"] = report.std;
    j["config_digest"] = report.config_digest;
    j["items"] = json::array();
    for (std::size_t i = 0; i < report.scores.size(); ++i)
        j["items"].push_back({{"id", report.ids[i]}, {"score", report.scores[i]}, {"generation", report.generations[i]}});
    j["failures"] = json::array();
    for (const auto& f : report.failures)
        j["failures"].push_back({{"index", f.index}, {"id", f.id}, {"message", f.message}});
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

SCReport read_sc_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    try {
        const json j = json::parse(in);
        SCReport r;
        r.task = tasks::parse_task(j.at("task").get<std::string>());
        r.config_digest = j.value("config_digest", "");
        for (const auto& it : j.at("items")) {
            r.ids.push_back(it.at("id").get<std::string>());
            r.scores.push_back(it.at("score").get<double>());
            r.generations.push_back(it.value("generation", ""));
        }
        for (const auto& f : j.value("failures", json::array()))
            r.failures.push_back({f.at("index").get<std::size_t>(), f.value("id", ""), f.value("message", "")});
        aggregate(r);
        return r;
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": malformed SC report: " + e.what());
    }
}

std::vector<InterpolatedItem> build_interpolated_testset(const std::vector<embedding::EmbeddingVector>& embeddings,
                                                         std::size_t n_pairs, std::uint64_t seed) {
    const std::size_t n = embeddings.size();
    if (n < 2) throw ValidationError("interpolation needs at least 2 embeddings");
    const std::size_t capacity = n * (n - 1) / 2;
    if (n_pairs > capacity)
        throw ValidationError("requested " + std::to_string(n_pairs) + " pairs but only " + std::to_string(capacity) +
                              " distinct pairs exist");
    Rng rng(derive_seed(seed, "interpolate"));
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    if (2 * n_pairs > capacity) {
        pairs.reserve(capacity);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
        rng.shuffle(std::span(pairs));
        pairs.resize(n_pairs);
    } else {
        std::set<std::pair<std::size_t, std::size_t>> seen;
        while (pairs.size() < n_pairs) {
            std::size_t a = rng.below(n), b = rng.below(n);
            if (a == b) continue;
            if (a > b) std::swap(a, b);
            if (seen.insert({a, b}).second) pairs.emplace_back(a, b);
        }
    }
    std::vector<InterpolatedItem> out;
    out.reserve(pairs.size());
    for (const auto& [a, b] : pairs) out.push_back({embedding::interpolate_pair(embeddings[a], embeddings[b]), a, b});
    return out;
}

}  // namespace elm::eval
