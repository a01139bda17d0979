#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "r3rec/embedding.hpp"
#include "r3rec/random.hpp"

namespace testutil {

inline oracle::Vec random_vec(r3rec::Rng& rng, std::size_t d) {
    oracle::Vec v(d);
    for (auto& x : v) x = rng.normal();
    return v;
}

inline r3rec::Embedding to_embedding(const oracle::Vec& v) { return r3rec::Embedding(v); }

inline oracle::Vec to_vec(const r3rec::Embedding& e) { return e.values(); }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::mt19937_64 gen(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() / ("r3rec-" + tag + "-" + r3rec::hex64(gen()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace testutil
