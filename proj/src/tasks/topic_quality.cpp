#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "elm/common/error.hpp"
#include "elm/common/text.hpp"
#include "elm/tasks/topics.hpp"

namespace elm::tasks {

namespace {

const std::unordered_set<std::string>& english_stopwords() {
    static const std::unordered_set<std::string> words = {
        "a",     "about", "above", "after", "again", "against", "all",   "also",  "am",    "an",    "and",
        "any",   "are",   "as",    "at",    "be",    "because", "been",  "before", "being", "below", "between",
        "both",  "but",   "by",    "can",   "could", "did",     "do",    "does",  "doing", "down",  "during",
        "each",  "few",   "for",   "from",  "further", "had",   "has",   "have",  "having", "he",   "her",
        "here",  "hers",  "him",   "his",   "how",   "i",       "if",    "in",    "into",  "is",    "it",
        "its",   "itself", "may",  "more",  "most",  "no",      "nor",   "not",   "of",    "off",   "on",
        "once",  "only",  "or",    "other", "our",   "out",     "over",  "own",   "same",  "she",   "should",
        "so",    "some",  "such",  "than",  "that",  "the",     "their", "them",  "then",  "there", "these",
        "they",  "this",  "those", "through", "to",  "too",     "under", "until", "up",    "very",  "was",
        "we",    "were",  "what",  "when",  "where", "which",   "while", "who",   "whom",  "why",   "will",
        "with",  "within", "without", "would", "you", "your",   "versus", "vs",   "however", "using", "used"};
    return words;
}

std::vector<std::size_t> topic_ids(std::span<const int> labels) {
    std::set<std::size_t> ids;
    for (int l : labels)
        if (l >= 0) ids.insert(static_cast<std::size_t>(l));
    return {ids.begin(), ids.end()};
}

}  // namespace

std::vector<std::string> topic_tokens(const std::string& text) {
    std::vector<std::string> out;
    for (auto w : text::word_spans(text)) {
        std::string l = text::lowercase(w);
        if (l.size() < 3) continue;
        if (std::all_of(l.begin(), l.end(), [](unsigned char c) { return std::isdigit(c); })) continue;
        if (english_stopwords().count(l)) continue;
        out.push_back(std::move(l));
    }
    return out;
}

std::vector<std::vector<std::string>> ctfidf_top_words(std::span<const int> labels, std::span<const std::string> texts,
                                                       std::size_t top_n) {
    if (labels.size() != texts.size()) throw ValidationError("labels and texts differ in length");
    int max_label = -1;
    for (int l : labels) max_label = std::max(max_label, l);
    const std::size_t k = static_cast<std::size_t>(max_label + 1);
    std::vector<std::map<std::string, double>> tf(k);
    std::unordered_map<std::string, double> total;
    double words = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) continue;
        for (auto& w : topic_tokens(texts[i])) {
            tf[static_cast<std::size_t>(labels[i])][w] += 1.0;
            total[w] += 1.0;
            words += 1.0;
        }
    }
    const double avg = k == 0 ? 0.0 : words / static_cast<double>(k);
    std::vector<std::vector<std::string>> out(k);
    for (std::size_t t = 0; t < k; ++t) {
        std::vector<std::pair<double, std::string>> scored;
        for (const auto& [w, c] : tf[t]) scored.emplace_back(c * std::log(1.0 + avg / total[w]), w);
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        for (std::size_t i = 0; i < std::min(top_n, scored.size()); ++i) out[t].push_back(scored[i].second);
    }
    return out;
}

double NpmiDiversityScorer::coherence(const std::vector<std::vector<std::string>>& top_words,
                                      std::span<const std::string> texts) {
    std::vector<std::unordered_set<std::string>> docs;
    docs.reserve(texts.size());
    for (const auto& t : texts) {
        auto toks = topic_tokens(t);
        docs.emplace_back(toks.begin(), toks.end());
    }
    const double n = static_cast<double>(docs.size());
    if (n == 0) return 0.0;
    std::unordered_map<std::string, double> df;
    auto doc_freq = [&](const std::string& w) {
        auto it = df.find(w);
        if (it != df.end()) return it->second;
        double c = 0;
        for (const auto& d : docs) c += d.count(w);
        return df[w] = c;
    };
    constexpr double kEps = 1e-12;
    double sum_topics = 0.0;
    std::size_t topics = 0;
    for (const auto& words : top_words) {
        const std::size_t m = std::min<std::size_t>(10, words.size());
        if (m < 2) continue;
        double s = 0.0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i + 1; j < m; ++j) {
                double joint = 0;
                for (const auto& d : docs) joint += d.count(words[i]) && d.count(words[j]);
                const double pij = joint / n + kEps;
                const double pi = doc_freq(words[i]) / n;
                const double pj = doc_freq(words[j]) / n;
                const double pmi = std::log(pij / (pi * pj));
                s += pmi / -std::log(pij);
                ++pairs;
            }
        sum_topics += s / static_cast<double>(pairs);
        ++topics;
    }
    return topics == 0 ? 0.0 : sum_topics / static_cast<double>(topics);
}

double NpmiDiversityScorer::diversity(const std::vector<std::vector<std::string>>& top_words) {
    std::set<std::string> unique;
    std::size_t total = 0;
    for (const auto& words : top_words)
        for (std::size_t i = 0; i < std::min<std::size_t>(25, words.size()); ++i) {
            unique.insert(words[i]);
            ++total;
        }
    return total == 0 ? 0.0 : static_cast<double>(unique.size()) / static_cast<double>(total);
}

double NpmiDiversityScorer::score(std::span<const int> labels, std::span<const std::string> texts) const {
    const auto top25 = ctfidf_top_words(labels, texts, 25);
    return coherence(top25, texts) * diversity(top25);
}

TopicFitResult fit_topics(std::span<const std::string> record_ids, std::span<const embedding::EmbeddingVector> embeddings,
                          std::span<const std::string> texts, const UmapConfig& reducer,
                          const std::vector<std::size_t>& min_cluster_sizes, const TopicScorer* scorer) {
    if (record_ids.size() != embeddings.size()) throw ValidationError("record ids and embeddings differ in length");
    if (min_cluster_sizes.empty()) throw ValidationError("min_cluster_size grid is empty");
    const std::size_t smallest = *std::min_element(min_cluster_sizes.begin(), min_cluster_sizes.end());
    if (embeddings.size() < 2 * smallest)
        throw ValidationError("fit_topics needs at least " + std::to_string(2 * smallest) + " embeddings, got " +
                              std::to_string(embeddings.size()));
    const bool scoring = min_cluster_sizes.size() > 1;
    NpmiDiversityScorer default_scorer;
    if (scoring) {
        if (texts.size() != embeddings.size()) throw ValidationError("a min_cluster_size grid needs one text per record");
        if (!scorer) scorer = &default_scorer;
    }
    const std::size_t dim = embeddings.front().dim();
    Matrix x(embeddings.size(), dim);
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        if (embeddings[i].dim() != dim) throw ValidationError("embeddings differ in dimension");
        std::copy(embeddings[i].values().begin(), embeddings[i].values().end(), x.row(i).begin());
    }
    const Matrix reduced = umap_reduce(x, reducer);

    TopicFitResult out;
    std::vector<int> best_labels;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t mcs : min_cluster_sizes) {
        auto labels = hdbscan(reduced, HdbscanConfig{mcs, 0});
        std::size_t clusters = 0, noise = 0;
        for (int l : labels) {
            clusters = std::max(clusters, static_cast<std::size_t>(l + 1));
            noise += l < 0;
        }
        double s = std::numeric_limits<double>::quiet_NaN();
        if (clusters > 0 && scoring) s = scorer->score(labels, texts);
        out.grid.push_back({mcs, clusters, static_cast<double>(noise) / static_cast<double>(labels.size()), s});
        if (clusters == 0) continue;
        const double cmp = scoring ? s : 0.0;
        if (best_labels.empty() || cmp > best_score) {
            best_score = cmp;
            best_labels = std::move(labels);
            out.chosen_min_cluster_size = mcs;
        }
    }
    if (best_labels.empty())
        throw Error("every point was classified as noise; try a smaller min_cluster_size");
    for (std::size_t i = 0; i < record_ids.size(); ++i) {
        const auto r = reduced.row(i);
        out.assignments.push_back({record_ids[i], best_labels[i], std::vector<double>(r.begin(), r.end())});
    }
    return out;
}

}  // namespace elm::tasks
