#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace elm::embedding {

enum class Section { background, objective, method, result, conclusion };

std::string_view section_name(Section s);
std::optional<Section> parse_section(std::string_view name);

// One section-structured trial abstract. Sections keep file order;
// full_text is their single-space concatenation, skipping empty sections.
struct AbstractRecord {
    std::string record_id;
    std::vector<std::pair<Section, std::string>> sections;
    std::string full_text;

    const std::string* section_text(Section s) const;
    std::vector<Section> present_sections() const;
};

// Builds a record and its full_text; throws ValidationError if every section
// is empty.
AbstractRecord make_record(std::string record_id, std::vector<std::pair<Section, std::string>> sections);

}  // namespace elm::embedding
