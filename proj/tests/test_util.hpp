#pragma once

#include <filesystem>
#include <fstream>
#include <string>

// Fresh scratch directory under the system temp dir.
inline std::string scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("ztpcp_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

inline std::string write_file(const std::string& dir, const std::string& name, const std::string& content) {
    auto path = (std::filesystem::path(dir) / name).string();
    std::ofstream(path) << content;
    return path;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}
