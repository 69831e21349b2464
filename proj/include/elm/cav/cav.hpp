#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <optional>
#include <string>
#include <vector>

#include "elm/cav/svm.hpp"
#include "elm/common/parallel.hpp"
#include "elm/embedding/embedder.hpp"
#include "elm/embedding/vector.hpp"
#include "elm/eval/judge.hpp"
#include "elm/eval/plot.hpp"
#include "elm/eval/sc.hpp"
#include "elm/llm/client.hpp"

namespace elm::cav {

// Concept and its two class names; positive is the direction of +α.
struct ConceptSpec {
    std::string name;  // sex or age
    std::string positive_class;
    std::string negative_class;
};

// sex: male (+) / female; age: older adults (+) / children
ConceptSpec default_concept(const std::string& name);

enum class Provenance { real, synthetic };

struct CavItem {
    std::string record_id;
    embedding::EmbeddingVector embedding;
    bool positive = false;
    Provenance provenance = Provenance::real;
    std::string text;
};

struct CavDataset {
    ConceptSpec concept_spec;
    std::vector<CavItem> items;

    std::size_t count(bool positive) const;
    // both classes with >= 2 items each, equal dims, and class sizes within
    // balance_tolerance of each other (fraction of the larger class)
    void validate(double balance_tolerance = 1.0) const;
};

// JSONL rows {record_id, label, provenance, text}; the label is a class name.
void write_cav_dataset(const std::filesystem::path& path, const CavDataset& data);
// Embeds every text with `embedder`.
CavDataset read_cav_dataset(const std::filesystem::path& path, const ConceptSpec& spec, embedding::Embedder& embedder);

struct ConceptVector {
    embedding::EmbeddingVector direction;  // unit norm, toward positive_class
    std::string concept_name;
    std::string positive_class;
    std::string negative_class;
    std::vector<double> weights;  // raw hyperplane normal
    double bias = 0.0;
    double margin = 0.0;  // 1 / |w|
    double train_accuracy = 0.0;
    std::size_t n_positive = 0;
    std::size_t n_negative = 0;

    // w.x + b on the raw hyperplane
    double decision(std::span<const double> x) const;
};

ConceptVector fit_cav(const CavDataset& data, const SvmConfig& cfg = {});

void write_concept_vector(const std::filesystem::path& path, const ConceptVector& cav);
ConceptVector read_concept_vector(const std::filesystem::path& path);

// normalize(z + α·direction)
embedding::EmbeddingVector apply_cav(const embedding::EmbeddingVector& z, const ConceptVector& cav, double alpha);

// Asks the oracle to rewrite `abstract_text` so its subjects are target_class.
std::string augment_counterfactual(const std::string& record_id, const std::string& abstract_text,
                                   const ConceptSpec& spec, bool to_positive, llm::LlmClient& oracle,
                                   const RetryPolicy& retry = {});

struct SeedAbstract {
    std::string record_id;
    std::string text;
    bool positive = false;
};

// Originals plus one flipped rewrite each, all embedded.
CavDataset build_augmented_dataset(const std::vector<SeedAbstract>& seeds, const ConceptSpec& spec,
                                   llm::LlmClient& oracle, embedding::Embedder& embedder,
                                   std::size_t max_parallel = 4, const RetryPolicy& retry = {});

std::vector<double> default_alpha_grid();

struct SweepConfig {
    std::vector<double> alphas = default_alpha_grid();
    std::uint64_t seed = 0;
    std::size_t max_parallel = 1;
    RetryPolicy retry{};
};

struct SweepCell {
    double alpha = 0.0;
    std::string record_id;
    bool ok = false;
    std::string generated;
    std::optional<eval::DemographicLabel> label;
    double sc = 0.0;
    std::string error;
};

struct SweepSummary {
    double alpha = 0.0;
    std::size_t n_ok = 0;
    std::size_t n_failed = 0;
    std::map<std::string, std::size_t> counts;  // sex
    std::vector<double> ages;                   // age
    double age_mean = 0.0;
    double sc_mean = 0.0;
    double sc_std = 0.0;
};

struct SweepResult {
    std::string concept_name;
    std::vector<SweepCell> cells;  // alpha-major
    std::vector<SweepSummary> summary;
    std::optional<SweepSummary> reference;

    eval::SweepPlot plot() const;
};

struct SweepSeed {
    std::string record_id;
    embedding::EmbeddingVector embedding;
    std::string text;  // original abstract, used for the reference column when non-empty
};

// For every (seed, α): apply_cav, decode emb2abs, extract the demographic,
// and score SC against the modified vector.
SweepResult sweep_alpha(const std::vector<SweepSeed>& seeds, const ConceptVector& cav, const SweepConfig& cfg,
                        const eval::TextGenerator& generate, llm::LlmClient& extractor,
                        embedding::Embedder& embedder);

// CSV {alpha, record_id, extracted_value, sc}, one row per cell.
void write_sweep_csv(const std::filesystem::path& path, const SweepResult& result);
// Per-α aggregate.
void write_sweep_json(const std::filesystem::path& path, const SweepResult& result);

}  // namespace elm::cav
