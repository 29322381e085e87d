#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace sysid {

std::string read_text_file(const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);

/// Write to a sibling temporary file, then rename over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Create `dir` for a fresh output. An existing non-empty directory is a
/// ConfigError unless `force` is set.
void prepare_output_dir(const std::filesystem::path& dir, bool force);

}  // namespace sysid
