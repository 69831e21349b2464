#include "elm/cav/cav.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include <json.hpp>

#include "elm/common/error.hpp"
#include "elm/common/resources.hpp"
#include "elm/common/rng.hpp"
#include "elm/common/text.hpp"
#include "elm/model/prompt.hpp"
#include "elm/simd/kernels.hpp"
#include "elm/tasks/task.hpp"

namespace elm::cav {

using embedding::EmbeddingVector;
using nlohmann::json;

ConceptSpec default_concept(const std::string& name) {
    if (name == "sex") return {"sex", "male", "female"};
    if (name == "age") return {"age", "older adults", "children"};
    throw ValidationError("unknown concept '" + name + "' (expected sex or age)");
}

std::size_t CavDataset::count(bool positive) const {
    return static_cast<std::size_t>(
        std::count_if(items.begin(), items.end(), [&](const CavItem& it) { return it.positive == positive; }));
}

void CavDataset::validate(double balance_tolerance) const {
    const std::size_t pos = count(true), neg = count(false);
    if (pos < 2 || neg < 2)
        throw ValidationError("CAV data needs at least 2 examples per class (have " + std::to_string(pos) + " " +
                              concept_spec.positive_class + ", " + std::to_string(neg) + " " +
                              concept_spec.negative_class + ")");
    const std::size_t dim = items.front().embedding.dim();
    for (const auto& it : items)
        if (it.embedding.dim() != dim) throw ValidationError("CAV embeddings have different dimensions");
    const double big = static_cast<double>(std::max(pos, neg)), small = static_cast<double>(std::min(pos, neg));
    if ((big - small) / big > balance_tolerance + 1e-12)
        throw ValidationError("CAV classes are unbalanced beyond the configured tolerance");
}

namespace {

std::string provenance_name(Provenance p) { return p == Provenance::real ? "real" : "synthetic"; }

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

}  // namespace

void write_cav_dataset(const std::filesystem::path& path, const CavDataset& data) {
    auto out = open_out(path);
    for (const auto& it : data.items)
        out << json{{"record_id", it.record_id},
                    {"label", it.positive ? data.concept_spec.positive_class : data.concept_spec.negative_class},
                    {"provenance", provenance_name(it.provenance)},
                    {"text", it.text}}
                   .dump()
            << '\n';
}

CavDataset read_cav_dataset(const std::filesystem::path& path, const ConceptSpec& spec, embedding::Embedder& embedder) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    CavDataset data;
    data.concept_spec = spec;
    std::vector<std::string> texts;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ValidationError(where + ": " + e.what());
        }
        CavItem it;
        try {
            it.record_id = j.at("record_id").get<std::string>();
            const auto label = j.at("label").get<std::string>();
            if (label == spec.positive_class)
                it.positive = true;
            else if (label != spec.negative_class)
                throw ValidationError(where + ": label '" + label + "' is neither " + spec.positive_class + " nor " +
                                      spec.negative_class);
            const auto prov = j.value("provenance", "real");
            if (prov != "real" && prov != "synthetic")
                throw ValidationError(where + ": provenance must be real or synthetic");
            it.provenance = prov == "real" ? Provenance::real : Provenance::synthetic;
            it.text = j.at("text").get<std::string>();
        } catch (const json::exception& e) {
            throw ValidationError(where + ": " + e.what());
        }
        if (text::trim(it.text).empty()) throw ValidationError(where + ": empty text");
        texts.push_back(it.text);
        data.items.push_back(std::move(it));
    }
    const auto vecs = embedder.embed_texts(texts);
    for (std::size_t i = 0; i < vecs.size(); ++i) data.items[i].embedding = vecs[i];
    return data;
}

double ConceptVector::decision(std::span<const double> x) const {
    if (x.size() != weights.size()) throw ValidationError("CAV dimension mismatch");
    return simd::dot(weights, x) + bias;
}

ConceptVector fit_cav(const CavDataset& data, const SvmConfig& cfg) {
    data.validate();
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (const auto& it : data.items) {
        x.emplace_back(it.embedding.values().begin(), it.embedding.values().end());
        y.push_back(it.positive ? 1 : -1);
    }
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = i + 1; j < x.size(); ++j)
            if (y[i] != y[j] && x[i] == x[j])
                throw ValidationError("degenerate CAV data: " + data.items[i].record_id + " and " +
                                      data.items[j].record_id + " are identical but labeled differently");
    LinearSvm svm = train_linear_svm(x, y, cfg);
    const double norm = std::sqrt(simd::sum_squares(svm.w));
    if (!(norm > 1e-12) || !std::isfinite(norm)) throw ValidationError("degenerate CAV data: no separating direction");

    ConceptVector cav;
    cav.concept_name = data.concept_spec.name;
    cav.positive_class = data.concept_spec.positive_class;
    cav.negative_class = data.concept_spec.negative_class;
    cav.weights = svm.w;
    cav.bias = svm.b;
    double pos_mean = 0.0, neg_mean = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) (y[i] > 0 ? pos_mean : neg_mean) += cav.decision(x[i]);
    if (pos_mean / static_cast<double>(data.count(true)) < neg_mean / static_cast<double>(data.count(false))) {
        for (double& w : cav.weights) w = -w;
        cav.bias = -cav.bias;
    }
    std::vector<double> dir(cav.weights);
    for (double& v : dir) v /= norm;
    cav.direction = EmbeddingVector(std::move(dir));
    cav.margin = 1.0 / norm;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < x.size(); ++i) correct += ((cav.decision(x[i]) > 0) == (y[i] > 0)) ? 1 : 0;
    cav.train_accuracy = static_cast<double>(correct) / static_cast<double>(x.size());
    cav.n_positive = data.count(true);
    cav.n_negative = data.count(false);
    return cav;
}

void write_concept_vector(const std::filesystem::path& path, const ConceptVector& cav) {
    json j{{"concept", cav.concept_name},
           {"positive_class", cav.positive_class},
           {"negative_class", cav.negative_class},
           {"direction", std::vector<double>(cav.direction.values().begin(), cav.direction.values().end())},
           {"weights", cav.weights},
           {"bias", cav.bias},
           {"margin", cav.margin},
           {"train_accuracy", cav.train_accuracy},
           {"n_positive", cav.n_positive},
           {"n_negative", cav.n_negative}};
    auto out = open_out(path);
    out << std::setprecision(17) << j.dump(2) << '\n';
}

ConceptVector read_concept_vector(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    try {
        const json j = json::parse(in);
        ConceptVector c;
        c.concept_name = j.at("concept").get<std::string>();
        c.positive_class = j.at("positive_class").get<std::string>();
        c.negative_class = j.value("negative_class", "");
        c.direction = EmbeddingVector(j.at("direction").get<std::vector<double>>());
        c.weights = j.value("weights", std::vector<double>(c.direction.values().begin(), c.direction.values().end()));
        c.bias = j.value("bias", 0.0);
        c.margin = j.value("margin", 0.0);
        c.train_accuracy = j.value("train_accuracy", 0.0);
        c.n_positive = j.value("n_positive", std::size_t{0});
        c.n_negative = j.value("n_negative", std::size_t{0});
        if (!c.direction.normalized()) throw ValidationError(path.string() + ": CAV direction is not unit norm");
        return c;
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": malformed concept vector: " + e.what());
    }
}

EmbeddingVector apply_cav(const EmbeddingVector& z, const ConceptVector& cav, double alpha) {
    if (z.dim() != cav.direction.dim())
        throw ValidationError("embedding has dimension " + std::to_string(z.dim()) + " but the CAV has " +
                              std::to_string(cav.direction.dim()));
    if (!std::isfinite(alpha)) throw ValidationError("alpha must be finite");
    std::vector<double> v(z.values().begin(), z.values().end());
    simd::axpy(alpha, cav.direction.values(), v);
    if (simd::sum_squares(v) == 0.0) throw ValidationError("z + alpha * direction is the zero vector");
    return embedding::normalize(EmbeddingVector(std::move(v)));
}

std::string augment_counterfactual(const std::string& record_id, const std::string& abstract_text,
                                   const ConceptSpec& spec, bool to_positive, llm::LlmClient& oracle,
                                   const RetryPolicy& retry) {
    if (text::trim(abstract_text).empty()) throw ValidationError(record_id + ": empty abstract");
    const char* tmpl_name = nullptr;
    if (spec.name == "sex")
        tmpl_name = "prompts/augment_sex.txt";
    else if (spec.name == "age")
        tmpl_name = "prompts/augment_age.txt";
    else
        throw ValidationError("no augmentation template for concept '" + spec.name + "'");
    const std::string& target = to_positive ? spec.positive_class : spec.negative_class;
    const std::string& source = to_positive ? spec.negative_class : spec.positive_class;
    const std::string prompt =
        text::render(resources::get(tmpl_name), {{"target", target}, {"source", source}, {"abstract", abstract_text}});
    std::string reply;
    try {
        reply = text::trim(llm::complete_with_retry(oracle, llm::user_request(prompt), retry));
    } catch (const std::exception& e) {
        throw Error(record_id + ": augmentation failed: " + e.what());
    }
    if (reply.empty()) throw Error(record_id + ": augmentation returned no text");
    return reply;
}

CavDataset build_augmented_dataset(const std::vector<SeedAbstract>& seeds, const ConceptSpec& spec,
                                   llm::LlmClient& oracle, embedding::Embedder& embedder, std::size_t max_parallel,
                                   const RetryPolicy& retry) {
    std::vector<std::string> rewrites(seeds.size());
    const auto failures = parallel_for(seeds.size(), max_parallel, [&](std::size_t i) {
        rewrites[i] = augment_counterfactual(seeds[i].record_id, seeds[i].text, spec, !seeds[i].positive, oracle, retry);
    });
    if (!failures.empty()) std::rethrow_exception(failures.front().error);
    std::vector<std::string> texts;
    for (const auto& s : seeds) texts.push_back(s.text);
    for (const auto& r : rewrites) texts.push_back(r);
    const auto vecs = embedder.embed_texts(texts);
    CavDataset data;
    data.concept_spec = spec;
    for (std::size_t i = 0; i < seeds.size(); ++i)
        data.items.push_back({seeds[i].record_id, vecs[i], seeds[i].positive, Provenance::real, seeds[i].text});
    for (std::size_t i = 0; i < seeds.size(); ++i)
        data.items.push_back({seeds[i].record_id + "#cf", vecs[seeds.size() + i], !seeds[i].positive,
                              Provenance::synthetic, rewrites[i]});
    return data;
}

std::vector<double> default_alpha_grid() {
    std::vector<double> g;
    for (int k = -5; k <= 5; ++k) g.push_back(0.25 * k);
    return g;
}

namespace {

eval::DemographicKind demographic_for(const std::string& concept_name) {
    return eval::parse_demographic_kind(concept_name);
}

void summarise(SweepSummary& s, const std::vector<const SweepCell*>& cells) {
    std::vector<double> sc;
    for (const SweepCell* c : cells) {
        if (!c->ok) {
            ++s.n_failed;
            continue;
        }
        ++s.n_ok;
        sc.push_back(c->sc);
        if (c->label->kind == eval::DemographicKind::sex)
            ++s.counts[c->label->sex];
        else
            s.ages.push_back(c->label->age);
    }
    std::tie(s.sc_mean, s.sc_std) = eval::mean_std(sc);
    s.age_mean = eval::mean_std(s.ages).first;
}

}  // namespace

eval::SweepPlot SweepResult::plot() const {
    eval::SweepPlot p;
    p.concept_name = concept_name;
    auto column = [](const SweepSummary& s) {
        eval::SweepColumn c;
        c.alpha = s.alpha;
        c.counts = s.counts;
        c.values = s.ages;
        c.sc_mean = s.sc_mean;
        return c;
    };
    for (const auto& s : summary) p.columns.push_back(column(s));
    if (reference) p.reference = column(*reference);
    return p;
}

SweepResult sweep_alpha(const std::vector<SweepSeed>& seeds, const ConceptVector& cav, const SweepConfig& cfg,
                        const eval::TextGenerator& generate, llm::LlmClient& extractor,
                        embedding::Embedder& embedder) {
    if (cfg.alphas.empty()) throw ValidationError("alpha grid is empty");
    for (std::size_t i = 1; i < cfg.alphas.size(); ++i)
        if (!(cfg.alphas[i] > cfg.alphas[i - 1])) throw ValidationError("alpha grid must be strictly increasing");
    if (seeds.empty()) throw ValidationError("sweep needs at least one seed embedding");
    const auto kind = demographic_for(cav.concept_name);
    const std::string instruction = tasks::task_instruction(tasks::TaskKind::emb2abs);

    SweepResult result;
    result.concept_name = cav.concept_name;
    const std::size_t n = seeds.size();
    result.cells.resize(cfg.alphas.size() * n);
    const auto failures = parallel_for(result.cells.size(), cfg.max_parallel, [&](std::size_t k) {
        const std::size_t a = k / n, i = k % n;
        SweepCell& cell = result.cells[k];
        cell.alpha = cfg.alphas[a];
        cell.record_id = seeds[i].record_id;
        const auto z = apply_cav(seeds[i].embedding, cav, cell.alpha);
        // one sampling seed per embedding, shared across the α grid
        cell.generated = generate(model::make_prompt(instruction, {z}), derive_seed(cfg.seed, "sweep." + seeds[i].record_id));
        if (text::trim(cell.generated).empty()) throw Error("generation produced no text");
        auto ex = eval::extract_demographics(kind, cell.generated, extractor, cfg.retry);
        if (!ex.label) throw Error(ex.error);
        cell.label = ex.label;
        cell.sc = embedding::cosine_similarity(embedder.embed(cell.generated), z);
        cell.ok = true;
    });
    for (const auto& f : failures) {
        try {
            std::rethrow_exception(f.error);
        } catch (const std::exception& e) {
            result.cells[f.index].error = e.what();
        }
        result.cells[f.index].ok = false;
    }
    for (std::size_t a = 0; a < cfg.alphas.size(); ++a) {
        SweepSummary s;
        s.alpha = cfg.alphas[a];
        std::vector<const SweepCell*> cells;
        for (std::size_t i = 0; i < n; ++i) cells.push_back(&result.cells[a * n + i]);
        summarise(s, cells);
        result.summary.push_back(std::move(s));
    }
    const bool have_text = std::all_of(seeds.begin(), seeds.end(), [](const SweepSeed& s) { return !s.text.empty(); });
    if (have_text) {
        std::vector<SweepCell> ref(n);
        parallel_for(n, cfg.max_parallel, [&](std::size_t i) {
            auto ex = eval::extract_demographics(kind, seeds[i].text, extractor, cfg.retry);
            ref[i].record_id = seeds[i].record_id;
            ref[i].ok = ex.label.has_value();
            ref[i].label = ex.label;
            ref[i].error = ex.error;
        });
        SweepSummary s;
        std::vector<const SweepCell*> cells;
        for (const auto& c : ref) cells.push_back(&c);
        summarise(s, cells);
        s.sc_mean = 0.0;
        s.sc_std = 0.0;
        result.reference = std::move(s);
    }
    return result;
}

void write_sweep_csv(const std::filesystem::path& path, const SweepResult& result) {
    auto out = open_out(path);
    out << "alpha,record_id,extracted_value,sc\n" << std::setprecision(10);
    for (const auto& c : result.cells) {
        out << c.alpha << ',' << c.record_id << ',';
        if (c.ok) out << c.label->value_string() << ',' << c.sc;
        else out << ',';
        out << '\n';
    }
}

void write_sweep_json(const std::filesystem::path& path, const SweepResult& result) {
    auto row = [](const SweepSummary& s) {
        json j{{"alpha", s.alpha}, {"n_ok", s.n_ok}, {"n_failed", s.n_failed}, {"sc_mean", s.sc_mean},
               {"sc_std", s.sc_std}};
        if (!s.counts.empty()) j["counts"] = s.counts;
        if (!s.ages.empty()) {
            j["ages"] = s.ages;
            j["age_mean"] = s.age_mean;
        }
        return j;
    };
    json j{{"concept", result.concept_name}, {"alphas", json::array()}};
    for (const auto& s : result.summary) j["alphas"].push_back(row(s));
    if (result.reference) {
        json r = row(*result.reference);
        r.erase("alpha");
        r.erase("sc_mean");
        r.erase("sc_std");
        j["reference"] = r;
    }
    std::vector<std::string> failures;
    for (const auto& c : result.cells)
        if (!c.ok) failures.push_back(c.record_id + " @ " + std::to_string(c.alpha) + ": " + c.error);
    j["failures"] = failures;
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

}  // namespace elm::cav
