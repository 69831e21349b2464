#include "elm/tasks/builders.hpp"

#include <mutex>

#include "elm/common/digest.hpp"
#include "elm/common/error.hpp"
#include "elm/common/parallel.hpp"
#include "elm/common/resources.hpp"
#include "elm/common/text.hpp"
#include "elm/embedding/embedder.hpp"

namespace elm::tasks {

using embedding::AbstractRecord;
using embedding::EmbeddingVector;
using embedding::Section;

EmbeddedCorpus::EmbeddedCorpus(std::vector<AbstractRecord> records, std::vector<EmbeddingVector> embeddings)
    : records_(std::move(records)), embeddings_(std::move(embeddings)) {
    if (records_.size() != embeddings_.size())
        throw ValidationError("corpus has " + std::to_string(records_.size()) + " records but " +
                              std::to_string(embeddings_.size()) + " embeddings");
    for (std::size_t i = 0; i < records_.size(); ++i)
        if (!index_.emplace(records_[i].record_id, i).second)
            throw ValidationError("duplicate record id " + records_[i].record_id);
}

std::size_t EmbeddedCorpus::index_of(const std::string& record_id) const {
    auto it = index_.find(record_id);
    if (it == index_.end()) throw ValidationError("unknown record id " + record_id);
    return it->second;
}

Section choose_section(const AbstractRecord& record, std::uint64_t seed) {
    const auto present = record.present_sections();
    if (present.empty()) throw ValidationError("record " + record.record_id + " has no sections");
    const std::uint64_t h = sha256_u64(std::to_string(seed) + "|" + record.record_id);
    return present[h % present.size()];
}

namespace {

std::string error_text(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const std::exception& ex) {
        return ex.what();
    } catch (...) {
        return "unknown error";
    }
}

}  // namespace

BuildResult build_single_embedding_task(TaskKind kind, const EmbeddedCorpus& corpus, llm::CachedOracle* oracle,
                                        std::uint64_t seed, Split split) {
    if (slots_for(kind) != 1) throw ValidationError(task_name(kind) + " is not a single-embedding task");
    if (kind == TaskKind::emb2pls && !oracle) throw ValidationError("emb2pls needs an oracle client");
    const auto& records = corpus.records();
    std::vector<std::string> targets(records.size());
    std::vector<std::string> instructions(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (kind == TaskKind::emb2abs) {
            instructions[i] = task_instruction(kind);
            targets[i] = r.full_text;
        } else if (kind == TaskKind::emb2sec) {
            const Section s = choose_section(r, seed);
            instructions[i] = task_instruction(kind, std::string(embedding::section_name(s)));
            targets[i] = *r.section_text(s);
        } else {
            instructions[i] = task_instruction(kind);
        }
    }
    std::vector<TaskFailure> failures;
    if (kind == TaskKind::emb2pls) {
        const std::string tmpl(resources::get("prompts/pls.txt"));
        failures = parallel_for(records.size(), oracle->max_parallel(), [&](std::size_t i) {
            const auto& r = records[i];
            const std::string prompt = text::render(tmpl, {{"abstract", r.full_text}});
            targets[i] = text::trim(oracle->ask(kPlsTemplateId, {embedding::text_digest(r.full_text)},
                                                llm::user_request(prompt, 0.0)));
            if (targets[i].empty()) throw Error("oracle returned an empty summary");
        });
    }
    BuildResult out;
    std::size_t f = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (f < failures.size() && failures[f].index == i) {
            out.failures.push_back({records[i].record_id, error_text(failures[f].error)});
            ++f;
            continue;
        }
        TaskInstance inst;
        inst.kind = kind;
        inst.prompt = model::make_prompt(instructions[i], {corpus.embeddings()[i]});
        inst.embedding_refs = {embedding::text_digest(records[i].full_text)};
        inst.target = targets[i];
        inst.source_ids = {records[i].record_id};
        inst.split = split;
        inst.validate();
        out.instances.push_back(std::move(inst));
    }
    return out;
}

BuildResult build_pair_task(TaskKind kind, std::span<const PairSpec> pairs, const EmbeddedCorpus& corpus,
                            llm::CachedOracle& oracle, Split split) {
    if (slots_for(kind) != 2) throw ValidationError(task_name(kind) + " is not a pair task");
    const bool com = kind == TaskKind::emb2com;
    const std::string tmpl(resources::get(com ? "prompts/commonalities.txt" : "prompts/differences.txt"));
    const char* tmpl_id = com ? kCommonalitiesTemplateId : kDifferencesTemplateId;
    for (const auto& p : pairs) {
        if (p.id_a == p.id_b) throw ValidationError("pair repeats record " + p.id_a);
        corpus.index_of(p.id_a);
        corpus.index_of(p.id_b);
    }
    std::vector<std::string> targets(pairs.size());
    const auto failures = parallel_for(pairs.size(), oracle.max_parallel(), [&](std::size_t i) {
        const auto& a = corpus.record(pairs[i].id_a);
        const auto& b = corpus.record(pairs[i].id_b);
        const std::string prompt = text::render(tmpl, {{"abstract1", a.full_text}, {"abstract2", b.full_text}});
        targets[i] = text::trim(oracle.ask(
            tmpl_id, {embedding::text_digest(a.full_text), embedding::text_digest(b.full_text)},
            llm::user_request(prompt, 0.0)));
        if (targets[i].empty()) throw Error("oracle returned an empty analysis");
    });
    BuildResult out;
    std::size_t f = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        if (f < failures.size() && failures[f].index == i) {
            out.failures.push_back({p.id_a + "|" + p.id_b, error_text(failures[f].error)});
            ++f;
            continue;
        }
        TaskInstance inst;
        inst.kind = kind;
        inst.prompt = model::make_prompt(task_instruction(kind), {corpus.embedding(p.id_a), corpus.embedding(p.id_b)});
        inst.embedding_refs = {embedding::text_digest(corpus.record(p.id_a).full_text),
                               embedding::text_digest(corpus.record(p.id_b).full_text)};
        inst.target = targets[i];
        inst.source_ids = {p.id_a, p.id_b};
        inst.split = split;
        inst.validate();
        out.instances.push_back(std::move(inst));
    }
    return out;
}

}  // namespace elm::tasks
