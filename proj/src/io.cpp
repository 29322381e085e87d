#include "sysid/io.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "sysid/errors.hpp"

namespace sysid {

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    try {
        return nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    static std::atomic<unsigned long> counter{0};
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()) % 100000) + "_" +
           std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw ConfigError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void prepare_output_dir(const std::filesystem::path& dir, bool force) {
    if (std::filesystem::exists(dir)) {
        if (!std::filesystem::is_directory(dir)) throw ConfigError(dir.string() + " exists and is not a directory");
        if (!std::filesystem::is_empty(dir) && !force) {
            throw ConfigError(dir.string() + " is not empty; pass --force to overwrite");
        }
    }
    std::filesystem::create_directories(dir);
}

}  // namespace sysid
