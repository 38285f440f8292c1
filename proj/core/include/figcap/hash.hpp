#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace figcap {

/// SHA-256 of `data`, lowercase hex.
std::string sha256_hex(std::string_view data);

/// SHA-256 of a file's bytes. Throws figcap::Error if the file can't be read.
std::string sha256_file_hex(const std::filesystem::path& path);

/// First 16 hex chars of `hex` as an unsigned integer (for mock policies).
std::uint64_t hex_prefix_u64(std::string_view hex);

} // namespace figcap
