#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace hntt::io {

// Writes `content` to a sibling temp file and renames it over `path`, so
// readers only ever see complete files. Creates parent directories.
void write_atomic(const std::filesystem::path& path, const std::string& content);

// Whole-file read; throws NotFoundError when missing.
std::string read_file(const std::filesystem::path& path);

std::string hex64(std::uint64_t v);
std::uint64_t parse_hex64(const std::string& s);

// UTC timestamp, ISO-8601 with seconds.
std::string utc_now();

}  // namespace hntt::io
