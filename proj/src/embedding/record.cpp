#include "elm/embedding/record.hpp"

#include <array>

#include "elm/common/error.hpp"
#include "elm/common/text.hpp"

namespace elm::embedding {

namespace {
constexpr std::array<std::string_view, 5> kNames = {"background", "objective", "method", "result", "conclusion"};
}

std::string_view section_name(Section s) { return kNames[static_cast<std::size_t>(s)]; }

std::optional<Section> parse_section(std::string_view name) {
    for (std::size_t i = 0; i < kNames.size(); ++i)
        if (kNames[i] == name) return static_cast<Section>(i);
    return std::nullopt;
}

const std::string* AbstractRecord::section_text(Section s) const {
    for (const auto& [sec, text] : sections)
        if (sec == s) return &text;
    return nullptr;
}

std::vector<Section> AbstractRecord::present_sections() const {
    std::vector<Section> out;
    for (const auto& [sec, text] : sections)
        if (!text.empty()) out.push_back(sec);
    return out;
}

AbstractRecord make_record(std::string record_id, std::vector<std::pair<Section, std::string>> sections) {
    for (auto& [sec, text] : sections) text = text::trim(text);
    AbstractRecord rec{std::move(record_id), std::move(sections), {}};
    for (const auto& [sec, text] : rec.sections) {
        if (text.empty()) continue;
        if (!rec.full_text.empty()) rec.full_text.push_back(' ');
        rec.full_text += text;
    }
    if (rec.full_text.empty()) throw ValidationError("abstract '" + rec.record_id + "' has no non-empty section");
    return rec;
}

}  // namespace elm::embedding
