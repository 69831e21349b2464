#include "elm/model/blob.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "elm/common/error.hpp"

namespace elm::model {

namespace {

constexpr char kMagic[8] = {'E', 'L', 'M', 'B', 'L', 'O', 'B', '1'};

static_assert(std::endian::native == std::endian::little, "blob I/O assumes a little-endian host");

}  // namespace

void write_blob(const std::filesystem::path& path, std::span<const Param* const> params) {
    nlohmann::json header;
    header["tensors"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const Param* p : params) {
        header["tensors"].push_back({{"name", p->name}, {"shape", p->shape}, {"offset", offset}});
        offset += p->size() * sizeof(float);
    }
    const std::string text = header.dump();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp);
        out.write(kMagic, sizeof(kMagic));
        const std::uint64_t len = text.size();
        out.write(reinterpret_cast<const char*>(&len), sizeof(len));
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        std::vector<float> buf;
        for (const Param* p : params) {
            buf.assign(p->value.begin(), p->value.end());
            out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
        }
        if (!out) throw Error("failed writing " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

std::vector<BlobTensor> read_blob(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open weight blob " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw Error(path.string() + " is not a weight blob");
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in || len > (1u << 30)) throw Error(path.string() + ": bad header length");
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw Error(path.string() + ": truncated header");
    const auto data_start = static_cast<std::uint64_t>(in.tellg());
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(path.string() + ": bad header: " + e.what());
    }
    std::vector<BlobTensor> out;
    std::vector<float> buf;
    for (const auto& t : header.at("tensors")) {
        BlobTensor bt;
        bt.name = t.at("name").get<std::string>();
        bt.shape = t.at("shape").get<std::vector<std::size_t>>();
        std::size_t count = 1;
        for (auto s : bt.shape) count *= s;
        in.seekg(static_cast<std::streamoff>(data_start + t.at("offset").get<std::uint64_t>()));
        buf.resize(count);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * sizeof(float)));
        if (!in) throw Error(path.string() + ": truncated data for " + bt.name);
        bt.values.assign(buf.begin(), buf.end());
        out.push_back(std::move(bt));
    }
    return out;
}

void load_blob_into(const std::filesystem::path& path, std::span<Param* const> params) {
    std::map<std::string, BlobTensor> by_name;
    for (auto& t : read_blob(path)) by_name.emplace(t.name, std::move(t));
    for (Param* p : params) {
        auto it = by_name.find(p->name);
        if (it == by_name.end()) throw Error(path.string() + " has no tensor " + p->name);
        if (it->second.shape != p->shape) throw Error(path.string() + ": tensor " + p->name + " has the wrong shape");
        p->value = std::move(it->second.values);
    }
}

}  // namespace elm::model
