#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "elm/embedding/vector.hpp"
#include "elm/model/prompt.hpp"
#include "elm/tasks/ingest.hpp"

namespace elm::tasks {

enum class TaskKind { emb2abs, emb2sec, emb2pls, emb2com, emb2dif };

inline constexpr std::array<TaskKind, 5> kAllTasks = {TaskKind::emb2abs, TaskKind::emb2sec, TaskKind::emb2pls,
                                                      TaskKind::emb2com, TaskKind::emb2dif};

std::string task_name(TaskKind k);
TaskKind parse_task(const std::string& s);
std::size_t slots_for(TaskKind k);

// Instruction with "<z>" slot markers; section only matters for emb2sec.
std::string task_instruction(TaskKind k, const std::string& section = {});

struct TaskInstance {
    TaskKind kind = TaskKind::emb2abs;
    model::MixedPrompt prompt;
    std::vector<std::string> embedding_refs;  // text digests, slot order
    std::string target;
    std::vector<std::string> source_ids;
    Split split = Split::train;

    // emb2com/emb2dif carry two embeddings, others one; target non-empty
    void validate() const;
};

// One instance per line: {kind, prompt_segments, embedding_refs, target,
// source_ids, split}. With inline_embeddings the vectors are written too.
void write_instances_jsonl(const std::filesystem::path& path, const std::vector<TaskInstance>& instances,
                           bool inline_embeddings = false);

// Resolves an embedding reference (digest) to its vector.
using EmbeddingResolver = std::function<embedding::EmbeddingVector(const std::string& ref)>;

std::vector<TaskInstance> read_instances_jsonl(const std::filesystem::path& path, const EmbeddingResolver& resolve);

}  // namespace elm::tasks
