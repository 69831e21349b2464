#include "elm/embedding/cache.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <mutex>
#include <random>

#include "elm/common/error.hpp"

namespace elm::embedding {

namespace fs = std::filesystem;

std::string backend_dir_name(const std::string& backend_id) {
    std::string out;
    for (char c : backend_id) {
        if (c == '/' || c == '\\')
            out += "__";
        else if (c == ':' || c == ' ')
            out += '_';
        else
            out += c;
    }
    return out;
}

std::vector<double> read_vec_file(const fs::path& path, std::size_t dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<std::uint32_t> raw(dim);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(dim * 4));
    if (in.gcount() != static_cast<std::streamsize>(dim * 4) || in.peek() != std::char_traits<char>::eof())
        throw Error("cache entry " + path.string() + " does not hold " + std::to_string(dim) + " float32 values");
    std::vector<double> out(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        std::uint32_t bits = raw[i];
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
        out[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    return out;
}

void write_vec_file(const fs::path& path, const std::vector<double>& values) {
    std::vector<std::uint32_t> raw(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
        raw[i] = bits;
    }
    fs::create_directories(path.parent_path());
    // write-then-rename keeps readers from seeing partial files
    thread_local std::mt19937_64 gen{std::random_device{}()};
    const fs::path tmp = path.string() + ".tmp" + std::to_string(gen());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
        if (!out) throw Error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

EmbeddingCache::EmbeddingCache(fs::path root, std::string backend_id, std::size_t dim)
    : backend_id_(std::move(backend_id)), dim_(dim) {
    if (!root.empty()) dir_ = root / "embeddings" / backend_dir_name(backend_id_);
}

fs::path EmbeddingCache::entry_path(const std::string& digest) const {
    return dir_ / digest.substr(0, 2) / (digest + ".vec");
}

std::optional<std::vector<double>> EmbeddingCache::get(const std::string& digest) {
    {
        std::shared_lock lock(mutex_);
        if (auto it = memory_.find(digest); it != memory_.end()) return it->second;
    }
    if (dir_.empty()) return std::nullopt;
    const fs::path p = entry_path(digest);
    if (!fs::exists(p)) return std::nullopt;
    auto values = read_vec_file(p, dim_);
    std::unique_lock lock(mutex_);
    memory_.emplace(digest, values);
    return values;
}

void EmbeddingCache::put(const std::string& digest, const std::vector<double>& values) {
    if (values.size() != dim_) throw Error("cache put: wrong dimension");
    {
        std::unique_lock lock(mutex_);
        if (!memory_.emplace(digest, values).second) return;
    }
    if (dir_.empty()) return;
    const fs::path p = entry_path(digest);
    if (!fs::exists(p)) write_vec_file(p, values);
}

std::size_t EmbeddingCache::memory_entries() const {
    std::shared_lock lock(mutex_);
    return memory_.size();
}

}  // namespace elm::embedding
