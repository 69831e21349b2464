#include "elm/eval/judge.hpp"

#include <cctype>
#include <cmath>
#include <sstream>
#include <fstream>

#include <json.hpp>

#include "elm/common/error.hpp"
#include "elm/common/resources.hpp"
#include "elm/common/rng.hpp"
#include "elm/common/text.hpp"
#include "elm/eval/redaction.hpp"
#include "elm/eval/sc.hpp"

namespace elm::eval {

using nlohmann::json;

namespace {

void write_json(const std::filesystem::path& path, const json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

std::string error_message(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const std::exception& ex) {
        return ex.what();
    } catch (...) {
    }
    return "unknown error";
}

// First {...} block of a reply, parsed with // and /* */ comments allowed.
std::optional<json> json_object_in(const std::string& reply) {
    const auto open = reply.find('{');
    const auto close = reply.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
    const json j = json::parse(reply.substr(open, close - open + 1), nullptr, false, true);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    return j;
}

std::optional<double> number_field(const json& j, const char* key) {
    if (!j.contains(key)) return std::nullopt;
    const auto& v = j.at(key);
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        try {
            std::size_t used = 0;
            const std::string s = text::trim(v.get<std::string>());
            const double d = std::stod(s, &used);
            if (used == s.size()) return d;
        } catch (const std::exception&) {
        }
    }
    return std::nullopt;
}

}  // namespace

// ---- win rate --------------------------------------------------------------

std::optional<int> parse_discriminator_answer(const std::string& reply) {
    std::string core;
    for (char c : reply)
        if (!std::isspace(static_cast<unsigned char>(c)) && c != '"' && c != '\'' && c != '.' && c != '`' &&
            c != '*')
            core += c;
    if (core == "1") return 1;
    if (core == "2") return 2;
    return std::nullopt;
}

std::string discriminator_prompt(const std::string& abstract1, const std::string& abstract2) {
    return text::render(resources::get("judge/discriminator.txt"),
                        {{"abstract1", abstract1}, {"abstract2", abstract2}});
}

WinRateReport run_winrate(const std::vector<std::string>& real_texts, const std::vector<std::string>& generated_texts,
                          llm::LlmClient& discriminator, const WinRateConfig& cfg) {
    if (real_texts.size() != generated_texts.size())
        throw ValidationError("win rate needs equally many real and generated texts");
    if (real_texts.empty()) throw ValidationError("win rate needs at least one pair");
    if (cfg.n_seeds == 0) throw ValidationError("win rate needs at least one seed");
    const std::size_t n = real_texts.size();
    std::vector<std::string> real(n), gen(n);
    for (std::size_t i = 0; i < n; ++i) {
        real[i] = cfg.redact ? redact_registry_ids(real_texts[i]).text : real_texts[i];
        gen[i] = cfg.redact ? redact_registry_ids(generated_texts[i]).text : generated_texts[i];
    }
    WinRateReport report;
    report.judge_model = discriminator.model_id();
    report.records.resize(n * cfg.n_seeds);
    for (std::size_t s = 0; s < cfg.n_seeds; ++s) {
        const std::uint64_t seed = derive_seed(cfg.seed, "winrate." + std::to_string(s));
        Rng rng(seed);
        for (std::size_t i = 0; i < n; ++i) {
            auto& r = report.records[s * n + i];
            r.pair_id = i;
            r.seed = seed;
            r.real_position = static_cast<int>(rng.below(2)) + 1;
        }
    }
    auto failures = parallel_for(report.records.size(), cfg.max_parallel, [&](std::size_t k) {
        auto& r = report.records[k];
        const std::size_t i = r.pair_id;
        const std::string prompt =
            r.real_position == 1 ? discriminator_prompt(real[i], gen[i]) : discriminator_prompt(gen[i], real[i]);
        const auto request = llm::user_request(prompt);
        auto answer = parse_discriminator_answer(llm::complete_with_retry(discriminator, request, cfg.retry));
        if (!answer) {
            r.reprompted = true;
            answer = parse_discriminator_answer(llm::complete_with_retry(discriminator, request, cfg.retry));
        }
        r.discriminator_answer = answer.value_or(0);
        r.win = answer.has_value() && *answer != r.real_position;
    });
    if (!failures.empty())
        throw Error("discriminator failed on pair " + std::to_string(report.records[failures.front().index].pair_id) +
                    ": " + error_message(failures.front().error));
    for (std::size_t s = 0; s < cfg.n_seeds; ++s) {
        std::size_t wins = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& r = report.records[s * n + i];
            wins += r.win ? 1 : 0;
            report.non_answers += r.discriminator_answer == 0 ? 1 : 0;
        }
        report.per_seed.push_back(static_cast<double>(wins) / static_cast<double>(n));
    }
    std::tie(report.mean, report.std) = mean_std(report.per_seed);
    return report;
}

void write_winrate_report(const std::filesystem::path& path, const WinRateReport& report) {
    json j;
    j["mean"] = report.mean;
    j["std"] = report.std;
    j["per_seed"] = report.per_seed;
    j["non_answers"] = report.non_answers;
    j["judge_model"] = report.judge_model;
    j["records"] = json::array();
    for (const auto& r : report.records)
        j["records"].push_back({{"pair_id", r.pair_id},
                                {"real_position", r.real_position},
                                {"discriminator_answer", r.discriminator_answer},
                                {"seed", r.seed},
                                {"win", r.win},
                                {"reprompted", r.reprompted}});
    write_json(path, j);
}

// ---- G-Eval --------------------------------------------------------------------

std::string geval_kind_name(GevalKind k) { return k == GevalKind::consistency ? "consistency" : "fluency"; }

GevalKind parse_geval_kind(const std::string& s) {
    if (s == "consistency") return GevalKind::consistency;
    if (s == "fluency") return GevalKind::fluency;
    throw ValidationError("unknown G-Eval metric '" + s + "' (expected consistency or fluency)");
}

std::string geval_prompt(GevalKind kind, const std::string& input_text, const std::string& output_text) {
    const std::string rubric(resources::get(kind == GevalKind::consistency ? "judge/consistency.txt"
                                                                        : "judge/fluency.txt"));
    const std::string marker = "\n\nEvaluation steps:";
    const auto cut = rubric.find(marker);
    const std::string criteria = cut == std::string::npos ? rubric : rubric.substr(0, cut);
    const std::string steps = cut == std::string::npos ? std::string() : rubric.substr(cut + 2);
    return text::render(resources::get("prompts/geval_judge.txt"),
                        {{"criteria", criteria}, {"steps", steps}, {"input", input_text}, {"output", output_text}});
}

std::optional<std::pair<double, std::string>> parse_geval_reply(const std::string& reply) {
    const auto j = json_object_in(reply);
    if (!j) return std::nullopt;
    const auto score = number_field(*j, "score");
    if (!score || !std::isfinite(*score) || *score < 0.0 || *score > 10.0) return std::nullopt;
    std::string reason;
    if (j->contains("reason") && j->at("reason").is_string()) reason = j->at("reason").get<std::string>();
    return std::make_pair(*score, reason);
}

GevalResult geval_score(GevalKind kind, const std::string& input_text, const std::string& output_text,
                        llm::LlmClient& judge, const RetryPolicy& retry) {
    GevalResult r;
    if (text::trim(output_text).empty()) {
        r.error = "empty output text";
        return r;
    }
    if (text::trim(input_text).empty() && kind == GevalKind::consistency) {
        r.error = "empty input text";
        return r;
    }
    const auto request = llm::user_request(geval_prompt(kind, input_text, output_text));
    for (int attempt = 0; attempt < 2; ++attempt) {
        const auto parsed = parse_geval_reply(llm::complete_with_retry(judge, request, retry));
        if (parsed) {
            r.ok = true;
            r.raw = parsed->first;
            r.score = parsed->first / 10.0;
            r.reason = parsed->second;
            return r;
        }
    }
    r.error = "judge reply was not a valid score";
    return r;
}

GevalReport geval_batch(GevalKind kind, const std::vector<std::string>& inputs, const std::vector<std::string>& outputs,
                        llm::LlmClient& judge, std::size_t max_parallel, const RetryPolicy& retry) {
    if (inputs.size() != outputs.size()) throw ValidationError("G-Eval needs equally many inputs and outputs");
    GevalReport report;
    report.kind = kind;
    report.judge_model = judge.model_id();
    report.items.resize(inputs.size());
    auto failures = parallel_for(inputs.size(), max_parallel, [&](std::size_t i) {
        report.items[i] = geval_score(kind, inputs[i], outputs[i], judge, retry);
    });
    for (const auto& f : failures) report.items[f.index].error = error_message(f.error);
    std::vector<double> ok;
    for (const auto& it : report.items)
        if (it.ok) ok.push_back(it.score);
    report.n = ok.size();
    std::tie(report.mean, report.std) = mean_std(ok);
    return report;
}

void write_geval_report(const std::filesystem::path& path, const GevalReport& report) {
    json j;
    j["metric"] = geval_kind_name(report.kind);
    j["n"] = report.n;
    j["mean"] = report.mean;
    j["std"] = report.std;
    j["judge_model"] = report.judge_model;
    j["items"] = json::array();
    for (const auto& it : report.items) {
        json e{{"ok", it.ok}};
        if (it.ok) {
            e["score"] = it.score;
            e["raw"] = it.raw;
            e["reason"] = it.reason;
        } else {
            e["error"] = it.error;
        }
        j["items"].push_back(e);
    }
    write_json(path, j);
}

// ---- demographics --------------------------------------------------------------

std::string demographic_kind_name(DemographicKind k) { return k == DemographicKind::sex ? "sex" : "age"; }

DemographicKind parse_demographic_kind(const std::string& s) {
    if (s == "sex") return DemographicKind::sex;
    if (s == "age") return DemographicKind::age;
    throw ValidationError("unknown demographic '" + s + "' (expected sex or age)");
}

void DemographicLabel::validate() const {
    if (kind == DemographicKind::sex) {
        if (sex != "male" && sex != "female" && sex != "neutral")
            throw ValidationError("sex label must be male, female or neutral");
    } else if (!(age > 0.0) || !std::isfinite(age)) {
        throw ValidationError("age label must be positive");
    }
}

std::string DemographicLabel::value_string() const {
    if (kind == DemographicKind::sex) return sex;
    std::ostringstream s;
    s << age;
    return s.str();
}

llm::ChatRequest extraction_request(DemographicKind kind, const std::string& abstract_text) {
    std::string system(resources::get(kind == DemographicKind::sex ? "extraction/sex.txt" : "extraction/age.txt"));
    std::string user = text::render(resources::get("prompts/extraction_user.txt"), {{"abstract", abstract_text}});
    return llm::system_user_request(std::move(system), std::move(user));
}

std::optional<DemographicLabel> parse_demographic_reply(DemographicKind kind, const std::string& reply) {
    const auto j = json_object_in(reply);
    if (!j) return std::nullopt;
    DemographicLabel label;
    label.kind = kind;
    if (kind == DemographicKind::sex) {
        if (!j->contains("gender") || !j->at("gender").is_string()) return std::nullopt;
        label.sex = text::lowercase(text::trim(j->at("gender").get<std::string>()));
    } else {
        const auto age = number_field(*j, "age");
        if (!age) return std::nullopt;
        label.age = *age;
    }
    try {
        label.validate();
    } catch (const ValidationError&) {
        return std::nullopt;
    }
    return label;
}

ExtractionResult extract_demographics(DemographicKind kind, const std::string& abstract_text, llm::LlmClient& agent,
                                      const RetryPolicy& retry) {
    ExtractionResult r;
    if (text::trim(abstract_text).empty()) {
        r.error = "empty abstract";
        return r;
    }
    const auto request = extraction_request(kind, abstract_text);
    for (int attempt = 0; attempt < 2; ++attempt) {
        r.raw = llm::complete_with_retry(agent, request, retry);
        r.label = parse_demographic_reply(kind, r.raw);
        if (r.label) return r;
    }
    r.error = "extraction reply was not valid JSON for " + demographic_kind_name(kind);
    return r;
}

}  // namespace elm::eval
