#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace elm {

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_file(const std::filesystem::path& path);

// First 8 bytes of SHA-256, big-endian.
std::uint64_t sha256_u64(std::string_view data);

}  // namespace elm
