#include "elm/tasks/task.hpp"

#include <fstream>

#include <json.hpp>

#include "elm/common/error.hpp"
#include "elm/common/text.hpp"

namespace elm::tasks {

using nlohmann::json;

std::string task_name(TaskKind k) {
    switch (k) {
        case TaskKind::emb2abs: return "emb2abs";
        case TaskKind::emb2sec: return "emb2sec";
        case TaskKind::emb2pls: return "emb2pls";
        case TaskKind::emb2com: return "emb2com";
        case TaskKind::emb2dif: return "emb2dif";
    }
    return "emb2abs";
}

TaskKind parse_task(const std::string& s) {
    for (auto k : kAllTasks)
        if (task_name(k) == s) return k;
    throw ValidationError("unknown task '" + s + "'");
}

std::size_t slots_for(TaskKind k) { return k == TaskKind::emb2com || k == TaskKind::emb2dif ? 2 : 1; }

std::string task_instruction(TaskKind k, const std::string& section) {
    switch (k) {
        case TaskKind::emb2abs: return "Provide the text of the abstract <z>";
        case TaskKind::emb2sec:
            if (section.empty()) throw ValidationError("emb2sec instruction needs a section");
            return "Write the " + section + " section for the abstract <z>";
        case TaskKind::emb2pls: return "Write a plain language summary of the abstract <z>";
        case TaskKind::emb2com:
            return "List five commonalities between the first abstract <z> and the second abstract <z>";
        case TaskKind::emb2dif: return "List five differences between the first abstract <z> and the second abstract <z>";
    }
    return {};
}

void TaskInstance::validate() const {
    prompt.validate();
    if (prompt.embeddings.size() != slots_for(kind))
        throw ValidationError(task_name(kind) + " instance carries " + std::to_string(prompt.embeddings.size()) +
                              " embeddings, expected " + std::to_string(slots_for(kind)));
    if (target.empty()) throw ValidationError(task_name(kind) + " instance has an empty target");
}

void write_instances_jsonl(const std::filesystem::path& path, const std::vector<TaskInstance>& instances,
                           bool inline_embeddings) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& inst : instances) {
        json segs = json::array();
        for (const auto& s : inst.prompt.segments) {
            if (const auto* t = std::get_if<model::TextSegment>(&s))
                segs.push_back({{"text", t->text}});
            else
                segs.push_back({{"slot", std::get<model::EmbeddingSlot>(s).index}});
        }
        json j = {{"kind", task_name(inst.kind)},          {"prompt_segments", segs},
                  {"embedding_refs", inst.embedding_refs}, {"target", inst.target},
                  {"source_ids", inst.source_ids},         {"split", split_name(inst.split)}};
        if (inline_embeddings) {
            json embs = json::array();
            for (const auto& e : inst.prompt.embeddings)
                embs.push_back(std::vector<double>(e.values().begin(), e.values().end()));
            j["embeddings"] = embs;
        }
        out << j.dump() << '\n';
    }
}

std::vector<TaskInstance> read_instances_jsonl(const std::filesystem::path& path, const EmbeddingResolver& resolve) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<TaskInstance> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
        try {
            const json j = json::parse(line);
            TaskInstance inst;
            inst.kind = parse_task(j.at("kind").get<std::string>());
            for (const auto& s : j.at("prompt_segments")) {
                if (s.contains("slot"))
                    inst.prompt.segments.emplace_back(model::EmbeddingSlot{s["slot"].get<std::size_t>()});
                else
                    inst.prompt.segments.emplace_back(model::TextSegment{s.at("text").get<std::string>()});
            }
            inst.embedding_refs = j.at("embedding_refs").get<std::vector<std::string>>();
            if (j.contains("embeddings")) {
                for (const auto& e : j["embeddings"])
                    inst.prompt.embeddings.emplace_back(e.get<std::vector<double>>());
            } else {
                if (!resolve) throw ValidationError("instance has embedding references but no resolver was given");
                for (const auto& ref : inst.embedding_refs) inst.prompt.embeddings.push_back(resolve(ref));
            }
            inst.target = j.at("target").get<std::string>();
            inst.source_ids = j.at("source_ids").get<std::vector<std::string>>();
            inst.split = parse_split(j.at("split").get<std::string>());
            inst.validate();
            out.push_back(std::move(inst));
        } catch (const json::exception& e) {
            throw ValidationError(where + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(where + e.what());
        }
    }
    return out;
}

}  // namespace elm::tasks
