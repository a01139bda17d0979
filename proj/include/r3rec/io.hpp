#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace r3rec {

using Json = nlohmann::json;

std::string read_file(const std::filesystem::path& path);

/// Writes via a temporary sibling file and rename, so readers never observe
/// a partially written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::vector<Json> read_jsonl(const std::filesystem::path& path);
void write_jsonl_atomic(const std::filesystem::path& path, const std::vector<Json>& rows);

/// Content hash of a file (FNV-1a, hex). Empty string if the file is missing.
std::string file_hash(const std::filesystem::path& path);

}  // namespace r3rec
