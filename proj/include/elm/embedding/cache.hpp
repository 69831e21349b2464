#pragma once

#include <filesystem>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace elm::embedding {

// Append-only map from text digest to vector for one backend, mirrored to
//   <root>/embeddings/<backend_id>/<first 2 hex chars>/<digest>.vec
// (little-endian float32, dim entries). An empty root keeps entries in
// memory only. Safe for concurrent readers and writers.
class EmbeddingCache {
public:
    EmbeddingCache(std::filesystem::path root, std::string backend_id, std::size_t dim);

    std::optional<std::vector<double>> get(const std::string& digest);
    // Existing entries are never overwritten.
    void put(const std::string& digest, const std::vector<double>& values);

    const std::string& backend_id() const { return backend_id_; }
    std::filesystem::path entry_path(const std::string& digest) const;
    std::size_t memory_entries() const;

private:
    std::filesystem::path dir_;
    std::string backend_id_;
    std::size_t dim_;
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, std::vector<double>> memory_;
};

// Directory-safe form of a backend id ("BAAI/bge" -> "BAAI__bge").
std::string backend_dir_name(const std::string& backend_id);

std::vector<double> read_vec_file(const std::filesystem::path& path, std::size_t dim);
void write_vec_file(const std::filesystem::path& path, const std::vector<double>& values);

}  // namespace elm::embedding
