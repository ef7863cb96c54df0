#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace sketchabs {

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);
std::string digest_of(std::string_view bytes);

/// Digest of a file's bytes; throws FormatError if unreadable.
std::string file_digest(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace sketchabs
