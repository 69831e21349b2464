#include "elm/common/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>

#include "elm/common/error.hpp"

namespace elm {
namespace {

using Digest = std::array<unsigned char, 32>;

struct MdCtxDeleter {
    void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};
using MdCtx = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;

MdCtx new_ctx() {
    MdCtx ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
        throw Error("sha256: digest init failed");
    return ctx;
}

Digest finish(EVP_MD_CTX* ctx) {
    Digest out{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx, out.data(), &len) != 1 || len != out.size())
        throw Error("sha256: digest final failed");
    return out;
}

Digest sha256_raw(const void* data, std::size_t size) {
    MdCtx ctx = new_ctx();
    EVP_DigestUpdate(ctx.get(), data, size);
    return finish(ctx.get());
}

std::string to_hex(const Digest& d) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(d.size() * 2, '0');
    for (std::size_t i = 0; i < d.size(); ++i) {
        out[2 * i] = digits[d[i] >> 4];
        out[2 * i + 1] = digits[d[i] & 0xF];
    }
    return out;
}

}  // namespace

std::string sha256_hex(std::string_view data) { return to_hex(sha256_raw(data.data(), data.size())); }

std::string sha256_hex(std::span<const std::uint8_t> data) {
    return to_hex(sha256_raw(data.data(), data.size()));
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    MdCtx ctx = new_ctx();
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return to_hex(finish(ctx.get()));
}

std::uint64_t sha256_u64(std::string_view data) {
    const Digest d = sha256_raw(data.data(), data.size());
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | d[i];
    return v;
}

}  // namespace elm
