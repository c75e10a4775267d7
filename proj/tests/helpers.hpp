#ifndef MBGP_TEST_HELPERS_HPP
#define MBGP_TEST_HELPERS_HPP

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace testutil {

inline std::string fixture_path(const std::string& name) {
    return std::string(MBGP_FIXTURE_DIR) + "/" + name;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string fixture_text(const std::string& name) { return read_file(fixture_path(name)); }

// Fresh scratch directory, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        auto base = std::filesystem::temp_directory_path();
        for (int i = 0;; ++i) {
            auto candidate =
                base / ("mbgp_" + std::to_string(::getpid()) + "_" + std::to_string(i));
            if (std::filesystem::create_directory(candidate)) {
                path = candidate;
                break;
            }
        }
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

}  // namespace testutil

#endif
