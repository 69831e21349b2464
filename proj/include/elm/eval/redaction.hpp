#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace elm::eval {

inline constexpr std::string_view kRedactedToken = "[redacted]";

struct RegistryPattern {
    std::string registry;
    std::string regex;
};

// Trial-registry identifier formats, one entry per registry.
const std::vector<RegistryPattern>& registry_patterns();

struct RedactionResult {
    std::string text;
    std::size_t count = 0;
};

// Replaces every registry identifier with [redacted]. At each position the
// longest match over all patterns wins; scanning resumes after it.
RedactionResult redact_registry_ids(std::string_view text);

}  // namespace elm::eval
