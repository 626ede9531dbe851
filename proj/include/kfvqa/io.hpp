#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace kfvqa {

using json = nlohmann::json;

// Calls `fn(line_number, record)` for every non-blank line. Malformed JSON
// raises a data error carrying the 1-based line number.
void read_jsonl(const std::filesystem::path& path,
                const std::function<void(std::size_t, const json&)>& fn);

std::string read_file(const std::filesystem::path& path);

// Write-to-temp-then-rename so readers never observe a partial file.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

std::string base64_encode(const std::string& bytes);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split_lines(std::string_view text);

}  // namespace kfvqa
