#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <json.hpp>

#include "elm/cav/cav.hpp"
#include "elm/cli/cli.hpp"
#include "elm/cli/config.hpp"
#include "elm/cli/run.hpp"
#include "elm/common/error.hpp"
#include "elm/common/text.hpp"
#include "elm/embedding/embedder.hpp"
#include "elm/eval/judge.hpp"
#include "elm/eval/redaction.hpp"
#include "elm/eval/sc.hpp"
#include "elm/model/checkpoint.hpp"
#include "elm/tasks/builders.hpp"
#include "elm/tasks/ingest.hpp"
#include "elm/tasks/pairs.hpp"
#include "elm/tasks/topics.hpp"
#include "elm/training/trainer.hpp"

namespace elm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---- shared helpers ------------------------------------------------------------

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

std::vector<json> read_jsonl(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read " + path.string());
    std::vector<json> rows;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (text::trim(line).empty()) continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return rows;
}

// First present string field among `fields`.
std::string field_of(const json& row, const std::vector<std::string>& fields, const std::string& where) {
    for (const auto& f : fields)
        if (row.contains(f) && row[f].is_string()) return row[f].get<std::string>();
    std::string names;
    for (const auto& f : fields) names += (names.empty() ? "" : "/") + f;
    throw ValidationError(where + ": missing text field " + names);
}

std::vector<std::string> read_texts(const fs::path& path, const std::string& field) {
    std::vector<std::string> out;
    const std::vector<std::string> fields =
        field.empty() ? std::vector<std::string>{"generated", "text", "full_text"} : std::vector<std::string>{field};
    std::size_t i = 0;
    for (const auto& row : read_jsonl(path)) out.push_back(field_of(row, fields, path.string() + " row " + std::to_string(++i)));
    return out;
}

std::vector<std::string> full_texts(const std::vector<embedding::AbstractRecord>& records) {
    std::vector<std::string> t;
    for (const auto& r : records) t.push_back(r.full_text);
    return t;
}

tasks::EmbeddingResolver no_resolver(const fs::path& path) {
    return [path](const std::string& ref) -> embedding::EmbeddingVector {
        throw ValidationError(path.string() + ": embedding " + ref + " is not stored inline");
    };
}

model::GenerationConfig generation_for(const AppConfig& cfg, tasks::TaskKind kind) {
    model::GenerationConfig g = eval::default_generation_config(kind, cfg.seed);
    g.temperature = cfg.generation.temperature;
    g.max_new_tokens = cfg.generation.max_new_tokens;
    g.penalty_scope = cfg.generation.penalty_scope;
    if (cfg.generation.repetition_penalty > 0.0) g.repetition_penalty = cfg.generation.repetition_penalty;
    return g;
}

cav::ConceptSpec concept_for(const AppConfig& cfg, const std::string& name) {
    cav::ConceptSpec spec = cav::default_concept(name);
    if (!cfg.cav.positive_class.empty() && cfg.cav.positive_class != spec.positive_class) {
        if (cfg.cav.positive_class != spec.negative_class)
            throw ValidationError("config key 'cav.positive_class' must be " + spec.positive_class + " or " +
                                  spec.negative_class + " for concept " + name);
        std::swap(spec.positive_class, spec.negative_class);
    }
    return spec;
}

struct Services {
    const AppConfig& cfg;
    std::shared_ptr<embedding::Embedder> embedder_;
    std::unique_ptr<llm::LlmClient> oracle_client_, judge_client_;
    std::unique_ptr<llm::ResponseCache> cache_;
    std::unique_ptr<llm::CachedOracle> oracle_;

    embedding::Embedder& embedder() {
        if (!embedder_) embedder_ = embedding::make_embedder(cfg.embedding, cfg.cache_dir);
        return *embedder_;
    }
    llm::CachedOracle& oracle() {
        if (!oracle_) {
            oracle_client_ = llm::make_client(cfg.oracle);
            cache_ = std::make_unique<llm::ResponseCache>(cfg.cache_dir);
            oracle_ = std::make_unique<llm::CachedOracle>(*oracle_client_, *cache_, cfg.oracle.retry,
                                                          cfg.oracle.max_parallel);
        }
        return *oracle_;
    }
    llm::LlmClient& oracle_client() {
        oracle();
        return *oracle_client_;
    }
    llm::LlmClient& judge() {
        if (!judge_client_) judge_client_ = llm::make_client(cfg.judge);
        return *judge_client_;
    }
};

// ---- options ----------------------------------------------------------------------

struct Options {
    std::string config, run_root, run_id;
    std::string in, out, records, topics, data, base, checkpoint, real, generated, real_field, generated_field;
    std::string split = "train", plan, task, metric, concept_name, cav_path, seeds, text_file, interp;
    std::vector<std::string> task_list;
    std::size_t limit = 0, n_pairs = 0;
};

using Handler = std::function<void(const AppConfig&, Run&, Options&)>;

// ---- subcommands ---------------------------------------------------------------------

void cmd_ingest(const AppConfig&, Run& run, Options& o) {
    run.add_input(o.in);
    std::map<tasks::Split, tasks::IngestResult> parts;
    if (fs::is_directory(o.in))
        parts = tasks::ingest_pubmed_rct_dir(o.in);
    else
        parts.emplace(tasks::parse_split(o.split), tasks::ingest_pubmed_rct(o.in));
    if (parts.empty()) throw ValidationError(o.in + ": no train.txt, dev.txt or test.txt found");
    for (const auto& [split, r] : parts) {
        const std::string name = tasks::split_name(split);
        const fs::path p = run.output(o.out.empty() ? fs::path() : fs::path(o.out) / (name + ".jsonl"), name + ".jsonl");
        tasks::write_records_jsonl(p, r.records);
        run.log(name + ": " + std::to_string(r.records.size()) + " records, " + std::to_string(r.skipped_empty) +
                " empty abstracts skipped -> " + p.string());
    }
}

void cmd_fit_topics(const AppConfig& cfg, Run& run, Options& o) {
    Services s{cfg};
    run.add_input(o.records);
    const auto records = tasks::read_records_jsonl(o.records);
    const auto texts = full_texts(records);
    std::vector<std::string> ids;
    for (const auto& r : records) ids.push_back(r.record_id);
    const auto embs = s.embedder().embed_texts(texts);
    tasks::NpmiDiversityScorer scorer;
    const auto fit = tasks::fit_topics(ids, embs, texts, cfg.umap, cfg.min_cluster_sizes, &scorer);
    auto out = open_out(run.output(o.out, "topics.jsonl"));
    std::size_t noise = 0;
    for (const auto& a : fit.assignments) {
        noise += a.topic_id < 0 ? 1 : 0;
        out << json{{"record_id", a.record_id}, {"topic_id", a.topic_id}, {"reduced_coords", a.reduced_coords}}.dump()
            << '\n';
    }
    json grid = json::array();
    for (const auto& g : fit.grid)
        grid.push_back({{"min_cluster_size", g.min_cluster_size},
                        {"n_clusters", g.n_clusters},
                        {"noise_fraction", g.noise_fraction},
                        {"score", std::isnan(g.score) ? json(nullptr) : json(g.score)}});
    const fs::path gp = run.output(fs::path(), "topic_grid.json");
    open_out(gp) << json{{"chosen_min_cluster_size", fit.chosen_min_cluster_size}, {"grid", grid}}.dump(2) << '\n';
    run.log("min_cluster_size " + std::to_string(fit.chosen_min_cluster_size) + ", " + std::to_string(noise) +
            " noise points of " + std::to_string(fit.assignments.size()));
}

std::vector<tasks::TopicAssignment> read_topics(const fs::path& path) {
    std::vector<tasks::TopicAssignment> out;
    for (const auto& row : read_jsonl(path)) {
        tasks::TopicAssignment a;
        a.record_id = row.at("record_id").get<std::string>();
        a.topic_id = row.at("topic_id").get<int>();
        if (row.contains("reduced_coords")) a.reduced_coords = row["reduced_coords"].get<std::vector<double>>();
        out.push_back(std::move(a));
    }
    return out;
}

void cmd_build_data(const AppConfig& cfg, Run& run, Options& o) {
    Services s{cfg};
    run.add_input(o.records);
    const auto split = tasks::parse_split(o.split);
    auto records = tasks::read_records_jsonl(o.records);
    const auto embs = s.embedder().embed_texts(full_texts(records));
    const tasks::EmbeddedCorpus corpus(std::move(records), embs);
    std::vector<tasks::TaskKind> kinds;
    if (o.task_list.empty())
        kinds.assign(tasks::kAllTasks.begin(), tasks::kAllTasks.end());
    else
        for (const auto& t : o.task_list) kinds.push_back(tasks::parse_task(t));

    std::optional<std::vector<tasks::PairSpec>> pairs;
    auto get_pairs = [&]() -> const std::vector<tasks::PairSpec>& {
        if (pairs) return *pairs;
        if (o.topics.empty()) throw ValidationError("pair tasks need --topics (output of fit-topics)");
        run.add_input(o.topics);
        const auto assignments = read_topics(o.topics);
        const auto cap = tasks::pair_capacity(assignments);
        const auto derived = static_cast<std::size_t>(cfg.data.pair_fraction * static_cast<double>(corpus.size()));
        const std::size_t n_same = cfg.data.n_same ? cfg.data.n_same : std::min<std::size_t>(derived, cap.same);
        const std::size_t n_diff =
            cfg.data.n_different ? cfg.data.n_different : std::min<std::size_t>(derived, cap.different);
        pairs = tasks::sample_pairs(assignments, n_same, n_diff, derive_seed(cfg.seed, "pairs." + o.split));
        auto out = open_out(run.output(o.out.empty() ? fs::path() : fs::path(o.out) / "pairs.jsonl", "pairs.jsonl"));
        for (const auto& p : *pairs)
            out << json{{"id_a", p.id_a}, {"id_b", p.id_b}, {"same_topic", p.same_topic}}.dump() << '\n';
        run.log("sampled " + std::to_string(n_same) + " same-topic and " + std::to_string(n_diff) +
                " cross-topic pairs");
        return *pairs;
    };

    json summary = json::object();
    auto failures_out =
        open_out(run.output(o.out.empty() ? fs::path() : fs::path(o.out) / "failures.jsonl", "failures.jsonl"));
    for (const auto kind : kinds) {
        tasks::BuildResult r;
        if (kind == tasks::TaskKind::emb2com || kind == tasks::TaskKind::emb2dif)
            r = tasks::build_pair_task(kind, get_pairs(), corpus, s.oracle(), split);
        else
            r = tasks::build_single_embedding_task(kind, corpus, kind == tasks::TaskKind::emb2pls ? &s.oracle() : nullptr,
                                                   cfg.seed, split);
        const std::string name = tasks::task_name(kind);
        const fs::path p = run.output(o.out.empty() ? fs::path() : fs::path(o.out) / (name + ".jsonl"), name + ".jsonl");
        tasks::write_instances_jsonl(p, r.instances, true);
        for (const auto& f : r.failures)
            failures_out << json{{"task", name}, {"record_id", f.record_id}, {"error", f.error}}.dump() << '\n';
        summary[name] = {{"instances", r.instances.size()}, {"failures", r.failures.size()}};
        run.log(name + ": " + std::to_string(r.instances.size()) + " instances, " + std::to_string(r.failures.size()) +
                " failures");
    }
    if (s.oracle_) {
        summary["oracle_calls"] = s.oracle_->calls();
        summary["oracle_cache_hits"] = s.oracle_->hits();
    }
    open_out(run.output(o.out.empty() ? fs::path() : fs::path(o.out) / "summary.json", "summary.json"))
        << summary.dump(2) << '\n';
}

std::map<tasks::TaskKind, std::vector<tasks::TaskInstance>> read_task_dir(const fs::path& dir) {
    std::map<tasks::TaskKind, std::vector<tasks::TaskInstance>> out;
    for (const auto k : tasks::kAllTasks) {
        const fs::path p = dir / (tasks::task_name(k) + ".jsonl");
        if (!fs::exists(p)) continue;
        auto inst = tasks::read_instances_jsonl(p, no_resolver(p));
        if (!inst.empty()) out[k] = std::move(inst);
    }
    if (out.empty()) throw ValidationError(dir.string() + ": no task files (<task>.jsonl) found");
    return out;
}

void cmd_init_base(const AppConfig& cfg, Run& run, Options& o) {
    std::vector<std::string> texts;
    if (!o.records.empty()) {
        run.add_input(o.records);
        for (auto& t : full_texts(tasks::read_records_jsonl(o.records))) texts.push_back(std::move(t));
    }
    if (!o.text_file.empty()) {
        run.add_input(o.text_file);
        std::ifstream in(o.text_file);
        std::string line;
        while (std::getline(in, line))
            if (!text::trim(line).empty()) texts.push_back(line);
    }
    if (texts.empty()) throw ValidationError("init-base needs --records and/or --text");
    const std::string id = "elm-base-d" + std::to_string(cfg.base.decoder.d_model) + "-l" +
                           std::to_string(cfg.base.decoder.n_layers);
    auto base = training::pretrain_base(texts, cfg.base, id, [&](std::size_t step, double loss) {
        if (step == 1 || step % 50 == 0 || step == cfg.base.steps)
            run.log("pretrain step " + std::to_string(step) + " loss " + std::to_string(loss));
    });
    const fs::path dir = run.output(o.out, "base");
    model::save_base_model(dir, base);
    run.log("base model " + id + " (vocab " + std::to_string(base.tokenizer.size()) + ") -> " + dir.string());
}

void cmd_train(const AppConfig& cfg, Run& run, Options& o) {
    run.add_input(o.data);
    run.add_input(o.base);
    training::TrainConfig tc = cfg.training;
    if (!o.plan.empty()) tc.plan = training::parse_plan(o.plan, cfg.adapter_lr, cfg.joint_lr);
    auto data = read_task_dir(o.data);
    std::map<tasks::TaskKind, std::size_t> sizes;
    for (const auto& [k, v] : data) sizes[k] = v.size();
    const auto schedule = tasks::interleave_schedule(sizes, derive_seed(cfg.seed, "interleave"));
    std::vector<tasks::TaskInstance> stream;
    stream.reserve(schedule.size());
    for (const auto& [k, i] : schedule) stream.push_back(data.at(k)[i]);
    if (o.limit && stream.size() > o.limit) stream.resize(o.limit);
    auto base = model::load_base_model(o.base);
    const std::size_t d_emb = stream.front().prompt.embeddings.front().dim();
    auto adapter = training::new_adapter(tc, d_emb, base);
    training::RunContext ctx;
    ctx.run_dir = run.dir();
    ctx.run_id = run.id();
    ctx.base_model_path = fs::absolute(o.base);
    ctx.on_step = [&](const training::LossRow& r) {
        run.log("step " + std::to_string(r.step) + " " + r.phase + " lr " + std::to_string(r.lr) + " loss " +
                std::to_string(r.loss) + " grad_norm " + std::to_string(r.grad_norm));
    };
    run.log("training on " + std::to_string(stream.size()) + " interleaved instances");
    const auto result = training::run_training(tc, stream, base, adapter, ctx);
    run.output(run.dir() / "loss.csv", "");
    run.output(result.final_checkpoint, "");
    run.log("final checkpoint -> " + result.final_checkpoint.string());
}

std::vector<eval::EvalItem> interp_items(const fs::path& path) {
    std::vector<eval::EvalItem> items;
    const std::string instruction = tasks::task_instruction(tasks::TaskKind::emb2abs);
    for (const auto& row : read_jsonl(path)) {
        eval::EvalItem it;
        it.id = row.at("id").get<std::string>();
        embedding::EmbeddingVector v(row.at("vector").get<std::vector<double>>());
        it.prompt = model::make_prompt(instruction, {v});
        it.target_vector = v;
        items.push_back(std::move(it));
    }
    return items;
}

void cmd_generate(const AppConfig& cfg, Run& run, Options& o) {
    run.add_input(o.checkpoint);
    run.add_input(o.data);
    const auto ck = model::load_checkpoint(o.checkpoint);
    auto inst = tasks::read_instances_jsonl(o.data, no_resolver(o.data));
    if (o.limit && inst.size() > o.limit) inst.resize(o.limit);
    auto out = open_out(run.output(o.out, "generations.jsonl"));
    for (std::size_t i = 0; i < inst.size(); ++i) {
        const auto item = eval::eval_item_from_instance(inst[i]);
        auto g = generation_for(cfg, inst[i].kind);
        g.seed = derive_seed(cfg.seed, "generate." + std::to_string(i));
        const auto text = model::generate(item.prompt, ck.adapter, ck.base.tokenizer, ck.base.decoder, g);
        out << json{{"id", item.id},
                    {"kind", tasks::task_name(inst[i].kind)},
                    {"input", inst[i].target},
                    {"generated", text},
                    {"target", inst[i].target}}
                   .dump()
            << '\n';
    }
    run.log("generated " + std::to_string(inst.size()) + " texts");
}

void cmd_eval_sc(const AppConfig& cfg, Run& run, Options& o) {
    Services s{cfg};
    run.add_input(o.checkpoint);
    const auto ck = model::load_checkpoint(o.checkpoint);
    std::vector<eval::EvalItem> items;
    tasks::TaskKind kind = tasks::TaskKind::emb2abs;
    std::string name;
    if (!o.interp.empty()) {
        run.add_input(o.interp);
        items = interp_items(o.interp);
        name = "interp";
    } else {
        if (o.data.empty()) throw ValidationError("eval-sc needs --data or --interp");
        run.add_input(o.data);
        const auto inst = tasks::read_instances_jsonl(o.data, no_resolver(o.data));
        if (inst.empty()) throw ValidationError(o.data + ": no instances");
        kind = inst.front().kind;
        for (const auto& i : inst) {
            if (i.kind != kind) throw ValidationError(o.data + ": instances mix task kinds");
            items.push_back(eval::eval_item_from_instance(i));
        }
        name = tasks::task_name(kind);
    }
    if (!o.task.empty()) kind = tasks::parse_task(o.task);
    if (o.limit && items.size() > o.limit) items.resize(o.limit);
    const auto g = generation_for(cfg, kind);
    const auto report = eval::eval_sc(kind, items, eval::checkpoint_generator(ck, g), s.embedder(),
                                      {cfg.seed, cfg.evaluation.max_parallel}, run.config_digest());
    eval::write_sc_report(run.output(o.out, name + "_sc.json"), report);
    run.log(name + " SC " + std::to_string(report.mean) + " +- " + std::to_string(report.std) + " over " +
            std::to_string(report.n) + " items (" + std::to_string(report.failures.size()) + " failures)");
}

void cmd_build_interp(const AppConfig& cfg, Run& run, Options& o) {
    Services s{cfg};
    run.add_input(o.records);
    const auto records = tasks::read_records_jsonl(o.records);
    const auto embs = s.embedder().embed_texts(full_texts(records));
    const std::size_t n = o.n_pairs ? o.n_pairs : cfg.evaluation.interp_pairs;
    const auto items = eval::build_interpolated_testset(embs, n, cfg.seed);
    auto out = open_out(run.output(o.out, "interp.jsonl"));
    for (const auto& it : items) {
        const auto& a = records[it.first].record_id;
        const auto& b = records[it.second].record_id;
        out << json{{"id", a + "+" + b},
                    {"source_ids", {a, b}},
                    {"vector", std::vector<double>(it.vector.values().begin(), it.vector.values().end())}}
                   .dump()
            << '\n';
    }
    run.log("wrote " + std::to_string(items.size()) + " interpolated vectors");
}

void cmd_winrate(const AppConfig& cfg, Run& run, Options& o) {
    Services s{cfg};
    run.add_input(o.real);
    run.add_input(o.generated);
    auto real = read_texts(o.real, o.real_field);
    auto gen = read_texts(o.generated, o.generated_field);
    if (o.limit) {
        real.resize(std::min(real.size(), o.limit));
        gen.resize(std::min(gen.size(), o.limit));
    }
    eval::WinRateConfig wc;
    wc.n_seeds = cfg.evaluation.n_seeds;
    wc.seed = cfg.seed;
    wc.max_parallel = cfg.judge.max_parallel;
    wc.retry = cfg.judge.retry;
    const auto report = eval::run_winrate(real, gen, s.judge(), wc);
    eval::write_winrate_report(run.output(o.out, "winrate.json"), report);
    run.log("win rate " + std::to_string(report.mean) + " +- " + std::to_string(report.std) + " (" +
            std::to_string(report.non_answers) + " non-answers)");
}

void cmd_geval(const AppConfig& cfg, Run& run, Options& o) {
    Services s{cfg};
    run.add_input(o.in);
    const auto kind = eval::parse_geval_kind(o.metric);
    std::vector<std::string> inputs, outputs;
    std::size_t i = 0;
    for (const auto& row : read_jsonl(o.in)) {
        const std::string where = o.in + " row " + std::to_string(++i);
        outputs.push_back(field_of(row, {"generated", "output"}, where));
        inputs.push_back(kind == eval::GevalKind::consistency ? field_of(row, {"input", "target"}, where)
                                                              : row.value("input", std::string()));
        if (o.limit && outputs.size() >= o.limit) break;
    }
    const auto report = eval::geval_batch(kind, inputs, outputs, s.judge(), cfg.judge.max_parallel, cfg.judge.retry);
    eval::write_geval_report(run.output(o.out, "geval_" + o.metric + ".json"), report);
    run.log("G-Eval " + o.metric + " " + std::to_string(report.mean) + " +- " + std::to_string(report.std) + " over " +
            std::to_string(report.n) + " items");
}

void cmd_redact(const AppConfig&, Run& run, Options& o) {
    run.add_input(o.in);
    std::ifstream in(o.in);
    if (!in) throw ValidationError("cannot read " + o.in);
    std::ostringstream ss;
    ss << in.rdbuf();
    const auto r = eval::redact_registry_ids(ss.str());
    open_out(run.output(o.out, "redacted.txt")) << r.text;
    run.log("redacted " + std::to_string(r.count) + " registry identifiers");
}

void cmd_cav_augment(const AppConfig& cfg, Run& run, Options& o) {
    Services s{cfg};
    run.add_input(o.seeds);
    const auto spec = concept_for(cfg, o.concept_name);
    std::vector<cav::SeedAbstract> seeds;
    std::size_t i = 0;
    for (const auto& row : read_jsonl(o.seeds)) {
        const std::string where = o.seeds + " row " + std::to_string(++i);
        cav::SeedAbstract sa;
        sa.record_id = row.at("record_id").get<std::string>();
        sa.text = field_of(row, {"text", "full_text"}, where);
        const auto label = row.at("label").get<std::string>();
        if (label != spec.positive_class && label != spec.negative_class)
            throw ValidationError(where + ": label '" + label + "' is not a class of concept " + spec.name);
        sa.positive = label == spec.positive_class;
        seeds.push_back(std::move(sa));
    }
    const auto data =
        cav::build_augmented_dataset(seeds, spec, s.oracle_client(), s.embedder(), cfg.oracle.max_parallel, cfg.oracle.retry);
    cav::write_cav_dataset(run.output(o.out, "cav_" + spec.name + ".jsonl"), data);
    run.log("augmented " + std::to_string(seeds.size()) + " abstracts into " + std::to_string(data.items.size()) +
            " items");
}

void cmd_cav_fit(const AppConfig& cfg, Run& run, Options& o) {
    Services s{cfg};
    run.add_input(o.data);
    const auto spec = concept_for(cfg, o.concept_name);
    const auto data = cav::read_cav_dataset(o.data, spec, s.embedder());
    data.validate(cfg.cav.balance_tolerance);
    const auto c = cav::fit_cav(data, cfg.cav.svm);
    cav::write_concept_vector(run.output(o.out, "cav_" + spec.name + ".json"), c);
    run.log("CAV " + spec.name + " toward " + spec.positive_class + ": train accuracy " +
            std::to_string(c.train_accuracy) + ", margin " + std::to_string(c.margin));
}

void cmd_cav_sweep(const AppConfig& cfg, Run& run, Options& o) {
    Services s{cfg};
    run.add_input(o.cav_path);
    run.add_input(o.checkpoint);
    run.add_input(o.seeds);
    const auto c = cav::read_concept_vector(o.cav_path);
    const auto ck = model::load_checkpoint(o.checkpoint);
    std::vector<cav::SweepSeed> seeds;
    std::vector<std::string> texts;
    std::size_t i = 0;
    for (const auto& row : read_jsonl(o.seeds)) {
        const std::string where = o.seeds + " row " + std::to_string(++i);
        seeds.push_back({row.at("record_id").get<std::string>(), {}, field_of(row, {"text", "full_text"}, where)});
        texts.push_back(seeds.back().text);
        if (o.limit && seeds.size() >= o.limit) break;
    }
    const auto embs = s.embedder().embed_texts(texts);
    for (std::size_t k = 0; k < seeds.size(); ++k) seeds[k].embedding = embs[k];
    cav::SweepConfig sc;
    sc.alphas = cfg.cav.alphas;
    sc.seed = cfg.seed;
    sc.max_parallel = cfg.evaluation.max_parallel;
    sc.retry = cfg.judge.retry;
    const auto result = cav::sweep_alpha(seeds, c, sc, eval::checkpoint_generator(ck, generation_for(cfg, tasks::TaskKind::emb2abs)),
                                         s.judge(), s.embedder());
    const fs::path dir = o.out.empty() ? run.outputs() : fs::path(o.out);
    cav::write_sweep_csv(run.output(dir / "sweep.csv", ""), result);
    cav::write_sweep_json(run.output(dir / "sweep.json", ""), result);
    eval::write_sweep_plot_csv(run.output(dir / "plot.csv", ""), result.plot());
    eval::write_sweep_svg(run.output(dir / "plot.svg", ""), result.plot());
    for (const auto& row : result.summary)
        run.log("alpha " + std::to_string(row.alpha) + ": " + std::to_string(row.n_ok) + " ok, SC " +
                std::to_string(row.sc_mean));
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Embedding language model toolkit", "elm"};
    app.set_version_flag("--version", kToolVersion);
    Options o;
    app.add_option("--config", o.config, "JSON config file (defaults apply to missing keys)");
    app.add_option("--run-root", o.run_root, "directory holding run folders (overrides run_root)");
    app.add_option("--run-id", o.run_id, "explicit run id");
    app.require_subcommand(1);

    std::map<CLI::App*, std::pair<std::string, Handler>> handlers;
    auto sub = [&](const std::string& name, const std::string& help, Handler h) {
        CLI::App* s = app.add_subcommand(name, help);
        handlers[s] = {name, std::move(h)};
        return s;
    };
    auto* c = sub("ingest", "parse PubMed-RCT files into records JSONL", cmd_ingest);
    c->add_option("--in", o.in, "directory with train/dev/test.txt or one file")->required();
    c->add_option("--split", o.split, "split for a single file");
    c->add_option("--out", o.out, "output directory");

    c = sub("fit-topics", "reduce, cluster and score topics over record embeddings", cmd_fit_topics);
    c->add_option("--records", o.records)->required();
    c->add_option("--out", o.out, "assignments JSONL");

    c = sub("build-data", "build task instance files", cmd_build_data);
    c->add_option("--records", o.records)->required();
    c->add_option("--topics", o.topics, "topic assignments for pair tasks");
    c->add_option("--split", o.split);
    c->add_option("--tasks", o.task_list, "subset of tasks");
    c->add_option("--out", o.out, "output directory");

    c = sub("init-base", "pretrain a small base chat model", cmd_init_base);
    c->add_option("--records", o.records);
    c->add_option("--text", o.text_file, "extra text, one document per line");
    c->add_option("--out", o.out, "output directory");

    c = sub("train", "train adapter and low-rank factors", cmd_train);
    c->add_option("--data", o.data, "directory of <task>.jsonl files")->required();
    c->add_option("--base", o.base, "base model directory")->required();
    c->add_option("--plan", o.plan, "xP-yE plan (overrides config)");
    c->add_option("--limit", o.limit, "truncate the interleaved stream");

    c = sub("generate", "decode task instances", cmd_generate);
    c->add_option("--checkpoint", o.checkpoint)->required();
    c->add_option("--data", o.data)->required();
    c->add_option("--limit", o.limit);
    c->add_option("--out", o.out);

    c = sub("eval-sc", "semantic consistency report", cmd_eval_sc);
    c->add_option("--checkpoint", o.checkpoint)->required();
    c->add_option("--data", o.data, "task instances");
    c->add_option("--interp", o.interp, "interpolated vectors from build-interp");
    c->add_option("--task", o.task, "task kind for penalty defaults");
    c->add_option("--limit", o.limit);
    c->add_option("--out", o.out);

    c = sub("build-interp", "interpolated test vectors", cmd_build_interp);
    c->add_option("--records", o.records)->required();
    c->add_option("--n-pairs", o.n_pairs);
    c->add_option("--out", o.out);

    c = sub("winrate", "discriminator win rate of generated vs real abstracts", cmd_winrate);
    c->add_option("--real", o.real)->required();
    c->add_option("--generated", o.generated)->required();
    c->add_option("--real-field", o.real_field);
    c->add_option("--generated-field", o.generated_field);
    c->add_option("--limit", o.limit);
    c->add_option("--out", o.out);

    c = sub("geval", "judged consistency or fluency", cmd_geval);
    c->add_option("--metric", o.metric)->required()->check(CLI::IsMember({"consistency", "fluency"}));
    c->add_option("--in", o.in, "generations JSONL")->required();
    c->add_option("--limit", o.limit);
    c->add_option("--out", o.out);

    c = sub("cav-augment", "counterfactual rewrites for CAV data", cmd_cav_augment);
    c->add_option("--concept", o.concept_name)->required()->check(CLI::IsMember({"sex", "age"}));
    c->add_option("--seeds", o.seeds, "JSONL {record_id, label, text}")->required();
    c->add_option("--out", o.out);

    c = sub("cav-fit", "fit a concept activation vector", cmd_cav_fit);
    c->add_option("--concept", o.concept_name)->required()->check(CLI::IsMember({"sex", "age"}));
    c->add_option("--data", o.data, "CAV dataset JSONL")->required();
    c->add_option("--out", o.out);

    c = sub("cav-sweep", "steer embeddings along a CAV and extract demographics", cmd_cav_sweep);
    c->add_option("--cav", o.cav_path)->required();
    c->add_option("--checkpoint", o.checkpoint)->required();
    c->add_option("--seeds", o.seeds, "JSONL {record_id, text}")->required();
    c->add_option("--limit", o.limit);
    c->add_option("--out", o.out, "output directory");

    c = sub("redact", "replace trial registry identifiers", cmd_redact);
    c->add_option("--in", o.in)->required();
    c->add_option("--out", o.out);

    if (argc <= 1) {
        std::cerr << app.help();
        return 1;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    CLI::App* chosen = app.get_subcommands().front();
    const auto& [name, handler] = handlers.at(chosen);
    AppConfig cfg;
    try {
        cfg = load_config(o.config);
        if (!o.run_root.empty()) cfg.run_root = o.run_root;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    std::vector<std::string> args(argv, argv + argc);
    std::unique_ptr<Run> run;
    try {
        run = std::make_unique<Run>(cfg, name, args, o.run_id);
        if (!o.config.empty()) run->add_input(o.config);
        handler(cfg, *run, o);
        run->finish(0);
        std::cout << run->dir().string() << '\n';
        return 0;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        if (run) run->finish(1, e.what());
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        if (run) run->finish(2, e.what());
        return 2;
    }
}

}  // namespace elm::cli
