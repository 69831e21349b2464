#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "elm/embedding/record.hpp"
#include "elm/embedding/vector.hpp"
#include "elm/llm/client.hpp"
#include "elm/tasks/pairs.hpp"
#include "elm/tasks/task.hpp"

namespace elm::tasks {

// Records with one embedding each, looked up by record id.
class EmbeddedCorpus {
public:
    EmbeddedCorpus(std::vector<embedding::AbstractRecord> records, std::vector<embedding::EmbeddingVector> embeddings);

    std::size_t size() const { return records_.size(); }
    const std::vector<embedding::AbstractRecord>& records() const { return records_; }
    const std::vector<embedding::EmbeddingVector>& embeddings() const { return embeddings_; }
    std::size_t index_of(const std::string& record_id) const;
    const embedding::AbstractRecord& record(const std::string& id) const { return records_[index_of(id)]; }
    const embedding::EmbeddingVector& embedding(const std::string& id) const { return embeddings_[index_of(id)]; }

private:
    std::vector<embedding::AbstractRecord> records_;
    std::vector<embedding::EmbeddingVector> embeddings_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct BuildFailure {
    std::string record_id;  // "a|b" for pairs
    std::string error;
};

struct BuildResult {
    std::vector<TaskInstance> instances;
    std::vector<BuildFailure> failures;
};

// Cache template ids for oracle responses.
inline constexpr const char* kPlsTemplateId = "prompts/pls.txt@1";
inline constexpr const char* kCommonalitiesTemplateId = "prompts/commonalities.txt@1";
inline constexpr const char* kDifferencesTemplateId = "prompts/differences.txt@1";

// Section used for a record's emb2sec instance: uniform over present
// sections, keyed by a hash of (seed, record_id).
embedding::Section choose_section(const embedding::AbstractRecord& record, std::uint64_t seed);

// emb2abs, emb2sec or emb2pls; oracle is required for emb2pls only.
BuildResult build_single_embedding_task(TaskKind kind, const EmbeddedCorpus& corpus, llm::CachedOracle* oracle,
                                        std::uint64_t seed, Split split);

// emb2com or emb2dif over the given pairs, slots in pair order.
BuildResult build_pair_task(TaskKind kind, std::span<const PairSpec> pairs, const EmbeddedCorpus& corpus,
                            llm::CachedOracle& oracle, Split split);

}  // namespace elm::tasks
