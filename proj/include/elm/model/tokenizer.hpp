#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace elm::model {

// Word-level tokenizer with a lossless character fallback. Pieces are
// letter runs, single digits, or single other characters, each optionally
// carrying one leading space; decoding is plain concatenation. Special
// tokens are written "<|name|>" and recognised verbatim in input text.
class Tokenizer {
public:
    static constexpr std::string_view kPad = "<|pad|>";
    static constexpr std::string_view kUnk = "<|unk|>";
    static constexpr std::string_view kBos = "<|bos|>";
    static constexpr std::string_view kEos = "<|eos|>";
    static constexpr std::string_view kSystem = "<|system|>";
    static constexpr std::string_view kUser = "<|user|>";
    static constexpr std::string_view kAssistant = "<|assistant|>";
    static constexpr std::string_view kEnd = "<|end|>";
    // marks one embedding slot; its row is replaced by the adapter output
    static constexpr std::string_view kEmbSlot = "<|emb|>";

    // Specials, the printable-ASCII alphabet, then the most frequent corpus
    // pieces up to max_vocab entries.
    static Tokenizer build(std::span<const std::string> corpus, std::size_t max_vocab, std::size_t min_count = 2);
    static Tokenizer from_tokens(std::vector<std::string> tokens);

    std::vector<int> encode(std::string_view text) const;
    std::string decode(std::span<const int> ids, bool skip_special = true) const;

    int id(std::string_view token) const;  // -1 when absent
    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    bool is_special(int id) const { return id >= 0 && id < kNumSpecial; }
    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    int pad_id() const { return 0; }
    int unk_id() const { return 1; }
    int bos_id() const { return 2; }
    int eos_id() const { return 3; }
    int system_id() const { return 4; }
    int user_id() const { return 5; }
    int assistant_id() const { return 6; }
    int end_id() const { return 7; }
    int slot_id() const { return 8; }

    static constexpr int kNumSpecial = 9;

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

// Splits text into tokenizer pieces (exposed for vocabulary statistics).
std::vector<std::string> pretokenize(std::string_view text);

}  // namespace elm::model
