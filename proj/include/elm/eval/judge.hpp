#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "elm/common/parallel.hpp"
#include "elm/llm/client.hpp"

namespace elm::eval {

// ---- win rate --------------------------------------------------------------

struct WinRateRecord {
    std::size_t pair_id = 0;
    int real_position = 1;        // 1 or 2
    int discriminator_answer = 0; // 1, 2, or 0 for a non-answer
    std::uint64_t seed = 0;
    bool win = false;             // generated text chosen as real
    bool reprompted = false;
};

struct WinRateConfig {
    std::size_t n_seeds = 5;
    std::uint64_t seed = 0;
    std::size_t max_parallel = 4;
    RetryPolicy retry{};
    bool redact = true;
};

struct WinRateReport {
    std::vector<double> per_seed;
    double mean = 0.0;
    double std = 0.0;
    std::size_t non_answers = 0;
    std::string judge_model;
    std::vector<WinRateRecord> records;
};

// "1"/"2" from a judge reply, ignoring quotes, punctuation and whitespace.
std::optional<int> parse_discriminator_answer(const std::string& reply);

std::string discriminator_prompt(const std::string& abstract1, const std::string& abstract2);

// Pairs real[i] with generated[i]; each seed draws the real position per pair.
WinRateReport run_winrate(const std::vector<std::string>& real_texts, const std::vector<std::string>& generated_texts,
                          llm::LlmClient& discriminator, const WinRateConfig& cfg = {});

void write_winrate_report(const std::filesystem::path& path, const WinRateReport& report);

// ---- G-Eval --------------------------------------------------------------------

enum class GevalKind { consistency, fluency };

std::string geval_kind_name(GevalKind k);
GevalKind parse_geval_kind(const std::string& s);

struct GevalResult {
    bool ok = false;
    double score = 0.0;  // raw / 10
    double raw = 0.0;    // judge scale, 0..10
    std::string reason;
    std::string error;
};

std::string geval_prompt(GevalKind kind, const std::string& input_text, const std::string& output_text);

// Parses {"score": 0..10, ...}; nullopt when malformed or out of range.
std::optional<std::pair<double, std::string>> parse_geval_reply(const std::string& reply);

// Malformed replies are retried once, then reported as a failure.
GevalResult geval_score(GevalKind kind, const std::string& input_text, const std::string& output_text,
                        llm::LlmClient& judge, const RetryPolicy& retry = {});

struct GevalReport {
    GevalKind kind = GevalKind::fluency;
    std::size_t n = 0;
    double mean = 0.0;
    double std = 0.0;
    std::string judge_model;
    std::vector<GevalResult> items;
};

GevalReport geval_batch(GevalKind kind, const std::vector<std::string>& inputs, const std::vector<std::string>& outputs,
                        llm::LlmClient& judge, std::size_t max_parallel = 4, const RetryPolicy& retry = {});

void write_geval_report(const std::filesystem::path& path, const GevalReport& report);

// ---- demographics --------------------------------------------------------------

enum class DemographicKind { sex, age };

std::string demographic_kind_name(DemographicKind k);
DemographicKind parse_demographic_kind(const std::string& s);

struct DemographicLabel {
    DemographicKind kind = DemographicKind::sex;
    std::string sex;   // male, female or neutral
    double age = 0.0;  // years, > 0

    void validate() const;
    std::string value_string() const;
};

struct ExtractionResult {
    std::optional<DemographicLabel> label;
    std::string raw;
    std::string error;
};

llm::ChatRequest extraction_request(DemographicKind kind, const std::string& abstract_text);

// Accepts JSON wrapped in prose or code fences and with // comments.
std::optional<DemographicLabel> parse_demographic_reply(DemographicKind kind, const std::string& reply);

// Unparseable replies are retried once, then reported as a failure.
ExtractionResult extract_demographics(DemographicKind kind, const std::string& abstract_text, llm::LlmClient& agent,
                                      const RetryPolicy& retry = {});

}  // namespace elm::eval
