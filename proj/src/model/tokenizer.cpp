#include "elm/model/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>

#include "elm/common/error.hpp"

namespace elm::model {

namespace {

constexpr std::array<std::string_view, Tokenizer::kNumSpecial> kSpecials = {
    Tokenizer::kPad,  Tokenizer::kUnk,       Tokenizer::kBos, Tokenizer::kEos,    Tokenizer::kSystem,
    Tokenizer::kUser, Tokenizer::kAssistant, Tokenizer::kEnd, Tokenizer::kEmbSlot};

bool is_letter(unsigned char c) { return std::isalpha(c) || c >= 0x80; }

// Length of the special token starting at text[i], or 0.
std::size_t special_at(std::string_view text, std::size_t i) {
    if (text.compare(i, 2, "<|") != 0) return 0;
    for (auto sp : kSpecials)
        if (text.compare(i, sp.size(), sp) == 0) return sp.size();
    return 0;
}

}  // namespace

std::vector<std::string> pretokenize(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (std::size_t n = special_at(text, i)) {
            out.emplace_back(text.substr(i, n));
            i += n;
            continue;
        }
        std::string piece;
        const unsigned char c = static_cast<unsigned char>(text[i]);
        if (c == ' ' && i + 1 < text.size() && !std::isspace(static_cast<unsigned char>(text[i + 1])) &&
            special_at(text, i + 1) == 0) {
            piece.push_back(' ');
            ++i;
        }
        const unsigned char h = static_cast<unsigned char>(text[i]);
        if (is_letter(h)) {
            const std::size_t start = i;
            while (i < text.size() && is_letter(static_cast<unsigned char>(text[i]))) ++i;
            piece.append(text.substr(start, i - start));
        } else {
            piece.push_back(text[i++]);
        }
        out.push_back(std::move(piece));
    }
    return out;
}

Tokenizer Tokenizer::from_tokens(std::vector<std::string> tokens) {
    if (tokens.size() < kNumSpecial) throw ValidationError("tokenizer vocabulary is missing special tokens");
    for (std::size_t i = 0; i < kSpecials.size(); ++i)
        if (tokens[i] != kSpecials[i]) throw ValidationError("tokenizer special token " + std::to_string(i) + " is not " + std::string(kSpecials[i]));
    Tokenizer t;
    t.tokens_ = std::move(tokens);
    for (std::size_t i = 0; i < t.tokens_.size(); ++i) {
        if (!t.index_.emplace(t.tokens_[i], static_cast<int>(i)).second)
            throw ValidationError("duplicate tokenizer entry '" + t.tokens_[i] + "'");
    }
    return t;
}

Tokenizer Tokenizer::build(std::span<const std::string> corpus, std::size_t max_vocab, std::size_t min_count) {
    std::vector<std::string> tokens(kSpecials.begin(), kSpecials.end());
    tokens.emplace_back("\n");
    tokens.emplace_back("\t");
    tokens.emplace_back(" ");
    for (int c = 33; c < 127; ++c) {
        tokens.emplace_back(1, static_cast<char>(c));
        tokens.push_back(std::string(" ") + static_cast<char>(c));
    }
    std::map<std::string, std::size_t> counts;
    for (const auto& doc : corpus)
        for (auto& p : pretokenize(doc))
            if (p.size() > 2 || (p.size() == 2 && p[0] != ' ')) ++counts[p];
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (const auto& [piece, n] : ranked) {
        if (tokens.size() >= max_vocab || n < min_count) break;
        if (piece.rfind("<|", 0) == 0) continue;
        tokens.push_back(piece);
    }
    return from_tokens(std::move(tokens));
}

int Tokenizer::id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? -1 : it->second;
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
    std::vector<int> ids;
    for (const auto& piece : pretokenize(text)) {
        if (int found = id(piece); found >= 0) {
            ids.push_back(found);
            continue;
        }
        // character fallback
        for (std::size_t k = 0; k < piece.size(); ++k) {
            std::string ch;
            if (k == 0 && piece[0] == ' ' && piece.size() > 1) {
                ch = piece.substr(0, 2);
                ++k;
            } else {
                ch = piece.substr(k, 1);
            }
            const int cid = id(ch);
            ids.push_back(cid >= 0 ? cid : unk_id());
        }
    }
    return ids;
}

std::string Tokenizer::decode(std::span<const int> ids, bool skip_special) const {
    std::string out;
    for (int i : ids) {
        if (skip_special && is_special(i)) continue;
        out += token(i);
    }
    return out;
}

}  // namespace elm::model
