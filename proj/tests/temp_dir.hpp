#pragma once

#include <unistd.h>

#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

namespace testutil {

// Per-process scratch directories, removed when the test binary exits.
class TempDirs {
public:
    ~TempDirs() {
        std::error_code ec;
        for (const auto& p : paths_) std::filesystem::remove_all(p, ec);
    }

    std::filesystem::path make(const std::string& name) {
        const auto p = std::filesystem::temp_directory_path() / (name + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(p);
        std::filesystem::create_directories(p);
        std::lock_guard lock(mu_);
        paths_.push_back(p);
        return p;
    }

private:
    std::mutex mu_;
    std::vector<std::filesystem::path> paths_;
};

inline std::filesystem::path temp_dir(const std::string& name) {
    static TempDirs dirs;
    return dirs.make(name);
}

}  // namespace testutil
