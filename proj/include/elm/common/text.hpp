#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace elm::text {

// Maximal runs of ASCII letters/digits (bytes >= 0x80 count as letters so
// UTF-8 words stay whole).
std::vector<std::string_view> word_spans(std::string_view s);

std::string lowercase(std::string_view s);

struct Truncation {
    std::string text;
    bool truncated = false;
};

// Keeps the first max_words whitespace-delimited tokens.
Truncation truncate_head(std::string_view s, std::size_t max_words);

std::string trim(std::string_view s);

// Replaces every "{key}" with its value; unknown placeholders are left as-is.
std::string render(std::string_view tmpl, const std::vector<std::pair<std::string, std::string>>& vars);

}  // namespace elm::text
