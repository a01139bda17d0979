#include "r3rec/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "r3rec/common.hpp"
#include "r3rec/http.hpp"
#include "r3rec/io.hpp"
#include "r3rec/parallel.hpp"
#include "r3rec/random.hpp"
#include "r3rec/text.hpp"

namespace r3rec {

namespace {

double l2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

std::string env_or_empty(const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
}

}  // namespace

Embedding::Embedding(std::vector<double> values) : values_(std::move(values)), norm_(l2(values_)) {}

Embedding Embedding::zeros(std::size_t dimension) { return Embedding(std::vector<double>(dimension, 0.0)); }

double dot(const Embedding& a, const Embedding& b) {
    if (a.dimension() != b.dimension()) {
        throw InvalidInput("embedding dimension mismatch: " + std::to_string(a.dimension()) + " vs " +
                           std::to_string(b.dimension()));
    }
    double s = 0.0;
    const auto& x = a.values();
    const auto& y = b.values();
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

double cosine(const Embedding& a, const Embedding& b) {
    const double d = dot(a, b);
    if (a.is_zero() || b.is_zero()) return 0.0;
    return std::clamp(d / (a.norm() * b.norm()), -1.0, 1.0);
}

Embedding weighted_sum(std::span<const Embedding> vectors, std::span<const double> weights, std::size_t dimension) {
    if (vectors.size() != weights.size()) throw InvalidInput("weighted_sum: size mismatch");
    std::vector<double> out(dimension, 0.0);
    for (std::size_t k = 0; k < vectors.size(); ++k) {
        if (vectors[k].dimension() != dimension) throw InvalidInput("weighted_sum: dimension mismatch");
        const auto& v = vectors[k].values();
        for (std::size_t i = 0; i < dimension; ++i) out[i] += weights[k] * v[i];
    }
    return Embedding(std::move(out));
}

Embedding subtract(const Embedding& a, const Embedding& b) {
    if (a.dimension() != b.dimension()) throw InvalidInput("subtract: dimension mismatch");
    std::vector<double> out(a.dimension());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    return Embedding(std::move(out));
}

std::string_view provider_kind_name(ProviderKind kind) {
    return kind == ProviderKind::kHashed ? "hashed" : "remote";
}

// ---------------------------------------------------------------------------

Embedding EmbeddingProvider::embed(std::string_view text) const {
    auto normalized = normalize_text(text);
    if (normalized.empty()) throw InvalidInput("cannot embed empty text");
    return embed_normalized(normalized);
}

std::vector<Embedding> EmbeddingProvider::embed_batch(const std::vector<std::string>& texts) const {
    std::vector<std::string> normalized;
    normalized.reserve(texts.size());
    for (const auto& t : texts) {
        normalized.push_back(normalize_text(t));
        if (normalized.back().empty()) throw InvalidInput("cannot embed empty text");
    }
    return embed_normalized_batch(normalized);
}

std::vector<Embedding> EmbeddingProvider::embed_normalized_batch(const std::vector<std::string>& texts) const {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_normalized(t));
    return out;
}

// ---------------------------------------------------------------------------

HashedEmbeddingProvider::HashedEmbeddingProvider(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
    if (dimension == 0) throw InvalidInput("embedding dimension must be positive");
}

std::string HashedEmbeddingProvider::fingerprint() const {
    return "hashed-d" + std::to_string(dimension_) + "-s" + hex64(seed_);
}

std::vector<double> HashedEmbeddingProvider::token_vector(std::string_view token) const {
    Rng rng(mix64(fnv1a64(token) ^ seed_));
    std::vector<double> v(dimension_);
    for (auto& x : v) x = rng.normal();
    return v;
}

Embedding HashedEmbeddingProvider::embed_normalized(const std::string& text) const {
    auto tokens = tokenize(text);
    std::sort(tokens.begin(), tokens.end());
    std::vector<double> sum(dimension_, 0.0);
    for (const auto& tok : tokens) {
        std::shared_ptr<const std::vector<double>> vec;
        {
            std::lock_guard lock(memo_mutex_);
            auto it = memo_.find(tok);
            if (it != memo_.end()) vec = it->second;
        }
        if (!vec) {
            vec = std::make_shared<const std::vector<double>>(token_vector(tok));
            std::lock_guard lock(memo_mutex_);
            memo_.emplace(tok, vec);
        }
        for (std::size_t i = 0; i < dimension_; ++i) sum[i] += (*vec)[i];
    }
    const double n = l2(sum);
    if (n > 0.0) {
        for (auto& x : sum) x /= n;
    }
    return Embedding(std::move(sum));
}

// ---------------------------------------------------------------------------

RemoteEmbeddingConfig RemoteEmbeddingConfig::from_env() {
    RemoteEmbeddingConfig c;
    c.url = env_or_empty("R3REC_EMBED_URL");
    c.api_key = env_or_empty("R3REC_EMBED_API_KEY");
    c.model = env_or_empty("R3REC_EMBED_MODEL");
    return c;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(RemoteEmbeddingConfig config)
    : config_(std::move(config)), dimension_(config_.dimension) {
    if (config_.url.empty()) throw InvalidInput("remote embedder needs an endpoint URL (R3REC_EMBED_URL)");
    if (config_.batch_size == 0) config_.batch_size = 1;
}

std::size_t RemoteEmbeddingProvider::dimension() const {
    {
        std::lock_guard lock(dim_mutex_);
        if (dimension_ != 0) return dimension_;
    }
    // Probe once to learn the dimension.
    request({"dimension probe"});
    std::lock_guard lock(dim_mutex_);
    return dimension_;
}

std::string RemoteEmbeddingProvider::fingerprint() const {
    return "remote-" + hex64(fnv1a64(config_.url + "|" + config_.model));
}

std::vector<Embedding> RemoteEmbeddingProvider::request(const std::vector<std::string>& texts) const {
    Json body = {{"input", texts}};
    if (!config_.model.empty()) body["model"] = config_.model;
    std::map<std::string, std::string> headers;
    if (!config_.api_key.empty()) headers["Authorization"] = "Bearer " + config_.api_key;

    const Json reply = post_json(config_.url, body, headers, config_.timeout_s,
                                 RetryPolicy{config_.max_attempts, config_.backoff_ms});
    const auto it = reply.find("embeddings");
    if (it == reply.end() || !it->is_array() || it->size() != texts.size()) {
        throw Error("embedding server reply lacks an 'embeddings' array of size " + std::to_string(texts.size()));
    }
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& row : *it) {
        auto values = row.get<std::vector<double>>();
        std::lock_guard lock(dim_mutex_);
        if (dimension_ == 0) dimension_ = values.size();
        if (values.size() != dimension_) {
            throw Error("embedding server returned dimension " + std::to_string(values.size()) + ", expected " +
                        std::to_string(dimension_));
        }
        out.emplace_back(std::move(values));
    }
    return out;
}

Embedding RemoteEmbeddingProvider::embed_normalized(const std::string& text) const {
    return request({text}).front();
}

std::vector<Embedding> RemoteEmbeddingProvider::embed_normalized_batch(const std::vector<std::string>& texts) const {
    const std::size_t chunks = (texts.size() + config_.batch_size - 1) / config_.batch_size;
    std::vector<std::vector<Embedding>> parts(chunks);
    parallel_for(chunks, config_.max_in_flight, [&](std::size_t c) {
        const auto begin = texts.begin() + static_cast<std::ptrdiff_t>(c * config_.batch_size);
        const auto end = texts.begin() + static_cast<std::ptrdiff_t>(std::min(texts.size(), (c + 1) * config_.batch_size));
        parts[c] = request(std::vector<std::string>(begin, end));
    });
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (auto& p : parts) {
        for (auto& e : p) out.push_back(std::move(e));
    }
    return out;
}

// ---------------------------------------------------------------------------

CachedEmbeddingProvider::CachedEmbeddingProvider(std::shared_ptr<const EmbeddingProvider> inner,
                                                 std::optional<std::filesystem::path> cache_dir)
    : inner_(std::move(inner)) {
    if (!inner_) throw InvalidInput("cached provider needs an inner provider");
    if (!cache_dir) return;
    std::filesystem::create_directories(*cache_dir);
    cache_file_ = *cache_dir / ("embeddings-" + inner_->fingerprint() + ".jsonl");
    if (!std::filesystem::exists(*cache_file_)) return;
    std::ifstream in(*cache_file_);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            const Json row = Json::parse(line);
            auto text = row.at("text").get<std::string>();
            if (row.at("key").get<std::string>() != hex64(fnv1a64(text))) continue;
            memo_.emplace(std::move(text), Embedding(row.at("vector").get<std::vector<double>>()));
        } catch (const Json::exception&) {
            // A torn trailing line from an interrupted run; the entry is recomputed.
        }
    }
}

std::size_t CachedEmbeddingProvider::cached_entries() const {
    std::lock_guard lock(mutex_);
    return memo_.size();
}

void CachedEmbeddingProvider::persist(const std::string& text, const Embedding& e) const {
    if (!cache_file_) return;
    const Json row = {{"key", hex64(fnv1a64(text))}, {"text", text}, {"vector", e.values()}};
    std::ofstream out(*cache_file_, std::ios::app);
    out << row.dump() << '\n';
}

Embedding CachedEmbeddingProvider::embed_normalized(const std::string& text) const {
    {
        std::lock_guard lock(mutex_);
        auto it = memo_.find(text);
        if (it != memo_.end()) return it->second;
    }
    Embedding e = inner_->embed_normalized(text);
    std::lock_guard lock(mutex_);
    auto [it, inserted] = memo_.emplace(text, e);
    if (inserted) persist(text, e);
    return it->second;
}

std::vector<Embedding> CachedEmbeddingProvider::embed_normalized_batch(const std::vector<std::string>& texts) const {
    std::vector<std::optional<Embedding>> slots(texts.size());
    std::vector<std::string> missing;
    {
        std::lock_guard lock(mutex_);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            auto it = memo_.find(texts[i]);
            if (it != memo_.end()) slots[i] = it->second;
            else missing.push_back(texts[i]);
        }
    }
    if (!missing.empty()) {
        std::sort(missing.begin(), missing.end());
        missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
        auto fresh = inner_->embed_normalized_batch(missing);
        std::lock_guard lock(mutex_);
        for (std::size_t i = 0; i < missing.size(); ++i) {
            auto [it, inserted] = memo_.emplace(missing[i], fresh[i]);
            if (inserted) persist(missing[i], fresh[i]);
        }
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (!slots[i]) slots[i] = memo_.at(texts[i]);
        }
    }
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

}  // namespace r3rec
