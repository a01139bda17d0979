#pragma once
/// @file embedding.hpp
/// @brief Dense text vectors and the providers that produce them.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace r3rec {

/// Fixed-length vector with its Euclidean norm cached at construction.
class Embedding {
public:
    Embedding() = default;
    explicit Embedding(std::vector<double> values);

    static Embedding zeros(std::size_t dimension);

    std::size_t dimension() const { return values_.size(); }
    const std::vector<double>& values() const { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    double norm() const { return norm_; }
    bool is_zero() const { return norm_ == 0.0; }

    friend bool operator==(const Embedding& a, const Embedding& b) { return a.values_ == b.values_; }

private:
    std::vector<double> values_;
    double norm_ = 0.0;
};

double dot(const Embedding& a, const Embedding& b);

/// Cosine similarity clamped to [-1, 1]. Zero when either vector is zero.
/// Throws InvalidInput on a dimension mismatch.
double cosine(const Embedding& a, const Embedding& b);

/// sum_i weights[i] * vectors[i]; all vectors must share one dimension.
Embedding weighted_sum(std::span<const Embedding> vectors, std::span<const double> weights, std::size_t dimension);

Embedding subtract(const Embedding& a, const Embedding& b);

enum class ProviderKind { kHashed, kRemote };

std::string_view provider_kind_name(ProviderKind kind);

/// Text encoder interface. Implementations must be pure functions of the
/// normalized text and safe for concurrent use.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual std::size_t dimension() const = 0;
    virtual ProviderKind kind() const = 0;
    /// Identifies the encoder configuration (used to key on-disk caches).
    virtual std::string fingerprint() const = 0;

    /// Normalizes `text` (lowercase, whitespace collapse); throws
    /// InvalidInput if nothing is left.
    Embedding embed(std::string_view text) const;
    std::vector<Embedding> embed_batch(const std::vector<std::string>& texts) const;

protected:
    virtual Embedding embed_normalized(const std::string& text) const = 0;
    virtual std::vector<Embedding> embed_normalized_batch(const std::vector<std::string>& texts) const;

    friend class CachedEmbeddingProvider;
};

/// Offline fallback: each token maps to a seeded pseudo-random Gaussian
/// vector; a text is the L2-normalized sum over its tokens (summed in sorted
/// token order, so the result ignores token order bit-for-bit).
class HashedEmbeddingProvider final : public EmbeddingProvider {
public:
    static constexpr std::uint64_t kDefaultSeed = 0x5233524543ULL;

    explicit HashedEmbeddingProvider(std::size_t dimension = 384, std::uint64_t seed = kDefaultSeed);

    std::size_t dimension() const override { return dimension_; }
    ProviderKind kind() const override { return ProviderKind::kHashed; }
    std::string fingerprint() const override;

    /// The unnormalized per-token projection (exposed for tests).
    std::vector<double> token_vector(std::string_view token) const;

protected:
    Embedding embed_normalized(const std::string& text) const override;

private:
    std::size_t dimension_;
    std::uint64_t seed_;
    mutable std::mutex memo_mutex_;
    mutable std::unordered_map<std::string, std::shared_ptr<const std::vector<double>>> memo_;
};

struct RemoteEmbeddingConfig {
    std::string url;          // POST endpoint, e.g. http://localhost:8080/embed
    std::string api_key;      // sent as "Authorization: Bearer <key>" when set
    std::string model;        // forwarded as "model" when set
    std::size_t dimension = 0;  // 0: taken from the first response
    int max_attempts = 3;
    int backoff_ms = 200;
    double timeout_s = 30.0;
    std::size_t batch_size = 32;
    std::size_t max_in_flight = 4;

    /// Reads R3REC_EMBED_URL, R3REC_EMBED_API_KEY, R3REC_EMBED_MODEL.
    static RemoteEmbeddingConfig from_env();
};

/// JSON-over-HTTP client: request {"input": [texts]}, response
/// {"embeddings": [[...], ...]}.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit RemoteEmbeddingProvider(RemoteEmbeddingConfig config);

    std::size_t dimension() const override;
    ProviderKind kind() const override { return ProviderKind::kRemote; }
    std::string fingerprint() const override;

protected:
    Embedding embed_normalized(const std::string& text) const override;
    std::vector<Embedding> embed_normalized_batch(const std::vector<std::string>& texts) const override;

private:
    std::vector<Embedding> request(const std::vector<std::string>& texts) const;

    RemoteEmbeddingConfig config_;
    mutable std::mutex dim_mutex_;
    mutable std::size_t dimension_;
};

/// Memoizing wrapper keyed on normalized text. With a cache directory the
/// memo is loaded from and appended to a JSON-lines file named after the
/// inner provider's fingerprint.
class CachedEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit CachedEmbeddingProvider(std::shared_ptr<const EmbeddingProvider> inner,
                                     std::optional<std::filesystem::path> cache_dir = std::nullopt);

    std::size_t dimension() const override { return inner_->dimension(); }
    ProviderKind kind() const override { return inner_->kind(); }
    std::string fingerprint() const override { return inner_->fingerprint(); }

    std::size_t cached_entries() const;
    std::optional<std::filesystem::path> cache_file() const { return cache_file_; }

protected:
    Embedding embed_normalized(const std::string& text) const override;
    std::vector<Embedding> embed_normalized_batch(const std::vector<std::string>& texts) const override;

private:
    void persist(const std::string& text, const Embedding& e) const;

    std::shared_ptr<const EmbeddingProvider> inner_;
    std::optional<std::filesystem::path> cache_file_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<std::string, Embedding> memo_;
};

}  // namespace r3rec
