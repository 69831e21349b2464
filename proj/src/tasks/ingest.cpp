#include "elm/tasks/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <optional>

#include <json.hpp>

#include "elm/common/error.hpp"
#include "elm/common/text.hpp"

namespace elm::tasks {

using embedding::AbstractRecord;
using embedding::Section;
using nlohmann::json;

std::string split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::validation: return "validation";
        case Split::test: return "test";
    }
    return "train";
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "validation" || s == "dev") return Split::validation;
    if (s == "test") return Split::test;
    throw ValidationError("unknown split '" + s + "'");
}

namespace {

std::optional<Section> label_section(const std::string& label) {
    if (label == "BACKGROUND") return Section::background;
    if (label == "OBJECTIVE") return Section::objective;
    if (label == "METHODS") return Section::method;
    if (label == "RESULTS") return Section::result;
    if (label == "CONCLUSIONS") return Section::conclusion;
    return std::nullopt;
}

}  // namespace

IngestResult parse_pubmed_rct(std::istream& in, const std::string& source_name) {
    IngestResult out;
    std::string id;
    std::vector<std::pair<Section, std::string>> sections;
    bool open = false;
    auto flush = [&] {
        if (!open) return;
        bool any = false;
        for (auto& [s, t] : sections) any = any || !t.empty();
        if (any)
            out.records.push_back(embedding::make_record(id, std::move(sections)));
        else
            ++out.skipped_empty;
        sections.clear();
        open = false;
    };
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty()) {
            flush();
            continue;
        }
        if (line.rfind("###", 0) == 0) {
            flush();
            id = text::trim(line.substr(3));
            if (id.empty()) throw ValidationError(source_name + ":" + std::to_string(lineno) + ": empty abstract id");
            open = true;
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw ValidationError(source_name + ":" + std::to_string(lineno) + ": line has no section label");
        const std::string label = line.substr(0, tab);
        const auto sec = label_section(label);
        if (!sec)
            throw ValidationError(source_name + ":" + std::to_string(lineno) + ": unknown section label '" + label + "'");
        if (!open) throw ValidationError(source_name + ":" + std::to_string(lineno) + ": sentence outside an abstract");
        const std::string sentence = text::trim(line.substr(tab + 1));
        if (sentence.empty()) continue;
        auto it = std::find_if(sections.begin(), sections.end(), [&](auto& p) { return p.first == *sec; });
        if (it == sections.end()) {
            sections.emplace_back(*sec, sentence);
        } else {
            if (!it->second.empty()) it->second += ' ';
            it->second += sentence;
        }
    }
    flush();
    out.lines = lineno;
    return out;
}

IngestResult ingest_pubmed_rct(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    return parse_pubmed_rct(in, path.string());
}

std::map<Split, IngestResult> ingest_pubmed_rct_dir(const std::filesystem::path& dir) {
    std::map<Split, IngestResult> out;
    const std::pair<Split, const char*> files[] = {
        {Split::train, "train.txt"}, {Split::validation, "dev.txt"}, {Split::test, "test.txt"}};
    for (auto [split, name] : files)
        if (std::filesystem::exists(dir / name)) out[split] = ingest_pubmed_rct(dir / name);
    if (out.empty()) throw ValidationError(dir.string() + " holds none of train.txt, dev.txt, test.txt");
    return out;
}

void write_records_jsonl(const std::filesystem::path& path, const std::vector<AbstractRecord>& records) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& r : records) {
        json secs = json::array();
        for (const auto& [s, t] : r.sections) secs.push_back({{"section", embedding::section_name(s)}, {"text", t}});
        out << json{{"record_id", r.record_id}, {"sections", secs}, {"full_text", r.full_text}}.dump() << '\n';
    }
}

std::vector<AbstractRecord> read_records_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<AbstractRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        try {
            const json j = json::parse(line);
            std::vector<std::pair<Section, std::string>> secs;
            for (const auto& s : j.at("sections")) {
                const auto name = s.at("section").get<std::string>();
                const auto sec = embedding::parse_section(name);
                if (!sec) throw ValidationError("unknown section '" + name + "'");
                secs.emplace_back(*sec, s.at("text").get<std::string>());
            }
            out.push_back(embedding::make_record(j.at("record_id").get<std::string>(), std::move(secs)));
        } catch (const json::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace elm::tasks
