#pragma once
/// @file random.hpp
/// @brief Platform-stable hashing and random number generation.
///
/// Everything here produces identical streams on every platform: the engine
/// (std::mt19937_64) is fully specified by the standard, and the
/// distributions are implemented locally instead of using the
/// implementation-defined std:: distributions.

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace r3rec {

/// FNV-1a over the bytes of `data`, starting from `basis`.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// SplitMix64 finalizer; a good bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x);

/// Derives a child seed from a parent seed and a label.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label);

/// Lowercase 16-digit hex rendering.
std::string hex64(std::uint64_t value);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform integer in [0, n). Rejection sampling, so unbiased.
    std::uint64_t uniform_index(std::uint64_t n);

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01();

    /// Standard normal via Box-Muller (caches the second variate).
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_index(i));
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace r3rec
