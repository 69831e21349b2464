#include "elm/common/text.hpp"

#include <cctype>

namespace elm::text {

namespace {
bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }
bool is_space(unsigned char c) { return std::isspace(c) != 0; }
}  // namespace

std::vector<std::string_view> word_spans(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && !is_word_byte(static_cast<unsigned char>(s[i]))) ++i;
        const std::size_t start = i;
        while (i < s.size() && is_word_byte(static_cast<unsigned char>(s[i]))) ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

std::string lowercase(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

Truncation truncate_head(std::string_view s, std::size_t max_words) {
    std::size_t count = 0;
    std::size_t i = 0;
    std::size_t last_end = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(static_cast<unsigned char>(s[i]))) ++i;
        if (i >= s.size()) break;
        if (count == max_words) return {std::string(s.substr(0, last_end)), true};
        ++count;
        while (i < s.size() && !is_space(static_cast<unsigned char>(s[i]))) ++i;
        last_end = i;
    }
    return {std::string(s), false};
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string render(std::string_view tmpl, const std::vector<std::pair<std::string, std::string>>& vars) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            const std::size_t close = tmpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                const std::string_view key = tmpl.substr(i + 1, close - i - 1);
                bool matched = false;
                for (const auto& [k, v] : vars) {
                    if (k == key) {
                        out += v;
                        matched = true;
                        break;
                    }
                }
                if (matched) {
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(tmpl[i++]);
    }
    return out;
}

}  // namespace elm::text
