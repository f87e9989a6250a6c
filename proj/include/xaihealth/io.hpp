#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "xaihealth/tensor.hpp"

namespace xaihealth::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::uint8_t> read_bytes(const fs::path& path);
std::string read_text(const fs::path& path);
json read_json(const fs::path& path);

// Writes to a sibling temp file and renames over the target.
void write_atomic(const fs::path& path, std::string_view contents);
void write_json(const fs::path& path, const json& doc);

void append_line(const fs::path& path, std::string_view line);
std::vector<std::string> read_lines(const fs::path& path);

Tensor read_tensor(const fs::path& path);
void write_tensor(const fs::path& path, const Tensor& t);

std::string utc_timestamp();

}  // namespace xaihealth::io
