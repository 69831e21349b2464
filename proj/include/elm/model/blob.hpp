#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "elm/model/tensor.hpp"

namespace elm::model {

// Flat float32 weight file: "ELMBLOB1", u64 header length, JSON header
// {"tensors":[{"name","shape","offset"}]}, then little-endian float32 data.
struct BlobTensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> values;
};

void write_blob(const std::filesystem::path& path, std::span<const Param* const> params);
std::vector<BlobTensor> read_blob(const std::filesystem::path& path);

// Copies matching tensors into params by name; missing or mis-shaped tensors
// are an error.
void load_blob_into(const std::filesystem::path& path, std::span<Param* const> params);

}  // namespace elm::model
