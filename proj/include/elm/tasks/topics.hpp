#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "elm/embedding/vector.hpp"
#include "elm/model/tensor.hpp"
#include "elm/tasks/pairs.hpp"

namespace elm::tasks {

using model::Matrix;

// ---- dimensionality reduction ----------------------------------------------

struct UmapConfig {
    std::size_t n_neighbors = 15;
    std::size_t n_components = 5;
    double min_dist = 0.1;
    double spread = 1.0;
    std::size_t n_epochs = 0;  // 0: 500 up to 10k points, 200 above
    double learning_rate = 1.0;
    std::size_t negative_sample_rate = 5;
    std::string metric = "cosine";  // cosine or euclidean
    std::uint64_t seed = 42;

    void validate() const;
};

// Parameters (a, b) of the low-dimensional similarity 1 / (1 + a d^(2b)),
// least-squares fitted to the min_dist/spread target curve.
std::pair<double, double> fit_ab(double spread, double min_dist);

// Brute-force k nearest neighbours (self included first).
struct KnnGraph {
    std::vector<std::vector<std::size_t>> indices;
    std::vector<std::vector<double>> distances;
};
KnnGraph knn_graph(const Matrix& points, std::size_t k, const std::string& metric);

// Symmetrised fuzzy neighbourhood graph as (i, j, weight) with i < j.
struct FuzzyEdge {
    std::size_t i;
    std::size_t j;
    double weight;
};
std::vector<FuzzyEdge> fuzzy_simplicial_set(const KnnGraph& knn);

Matrix umap_reduce(const Matrix& points, const UmapConfig& cfg);

// ---- density clustering ----------------------------------------------------

struct HdbscanConfig {
    std::size_t min_cluster_size = 250;
    std::size_t min_samples = 0;  // 0: same as min_cluster_size
};

// Euclidean HDBSCAN with excess-of-mass selection; -1 marks noise. Cluster
// labels are 0..k-1.
std::vector<int> hdbscan(const Matrix& points, const HdbscanConfig& cfg);

// ---- topic quality -----------------------------------------------------------

std::vector<std::string> topic_tokens(const std::string& text);

// Top words per topic by class-based TF-IDF; index = topic id.
std::vector<std::vector<std::string>> ctfidf_top_words(std::span<const int> labels, std::span<const std::string> texts,
                                                       std::size_t top_n);

class TopicScorer {
public:
    virtual ~TopicScorer() = default;
    virtual std::string name() const = 0;
    virtual double score(std::span<const int> labels, std::span<const std::string> texts) const = 0;
};

// NPMI coherence of the top-10 words per topic (document co-occurrence)
// times the fraction of unique words among every topic's top-25.
class NpmiDiversityScorer : public TopicScorer {
public:
    std::string name() const override { return "npmi_x_diversity"; }
    double score(std::span<const int> labels, std::span<const std::string> texts) const override;

    static double coherence(const std::vector<std::vector<std::string>>& top_words, std::span<const std::string> texts);
    static double diversity(const std::vector<std::vector<std::string>>& top_words);
};

struct GridPoint {
    std::size_t min_cluster_size;
    std::size_t n_clusters;
    double noise_fraction;
    double score;  // NaN when not scored
};

struct TopicFitResult {
    std::vector<TopicAssignment> assignments;
    std::size_t chosen_min_cluster_size = 0;
    std::vector<GridPoint> grid;
};

// Reduce, cluster for each grid value and keep the best-scoring value.
// texts may be empty when the grid has a single value.
TopicFitResult fit_topics(std::span<const std::string> record_ids, std::span<const embedding::EmbeddingVector> embeddings,
                          std::span<const std::string> texts, const UmapConfig& reducer,
                          const std::vector<std::size_t>& min_cluster_sizes, const TopicScorer* scorer = nullptr);

}  // namespace elm::tasks
