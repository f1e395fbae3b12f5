#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace landreuse::io {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& j, int indent = 2);

nlohmann::json read_json(const std::filesystem::path& path);

// One JSON object per non-empty line. Parse errors name the line number.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t line_no, const nlohmann::json&)>& fn);
void write_jsonl_atomic(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows);

// FNV-1a, used for feature hashing and data fingerprints.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace landreuse::io
