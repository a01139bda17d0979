#pragma once
/// @file llm.hpp
/// @brief Chat-completion clients: a live HTTP backend and a deterministic mock.

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "r3rec/http.hpp"

namespace r3rec {

struct ChatRequest {
    std::string system;
    std::string prompt;
    int max_tokens = 20;
    double temperature = 0.0;
    bool logprobs = true;
    int top_logprobs = 5;
};

struct TokenAlternative {
    std::string token;
    double logprob = 0.0;
};

struct TokenLogprob {
    std::string token;
    double logprob = 0.0;
    std::vector<TokenAlternative> top;
};

struct Completion {
    std::string text;
    std::vector<TokenLogprob> tokens;  // empty when the backend gave no log-probabilities
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
};

enum class BackendKind { kLive, kMock };

std::string_view backend_kind_name(BackendKind kind);

class LlmClient {
public:
    virtual ~LlmClient() = default;

    virtual BackendKind kind() const = 0;
    virtual std::string fingerprint() const = 0;
    /// Must be safe to call concurrently.
    virtual Completion complete(const ChatRequest& request) const = 0;
};

struct LiveLlmConfig {
    std::string url;  // chat-completions endpoint
    std::string api_key;
    std::string model = "gpt-3.5-turbo";
    double timeout_s = 60.0;
    RetryPolicy retry;

    /// Reads R3REC_JUDGE_URL, R3REC_JUDGE_API_KEY, R3REC_JUDGE_MODEL.
    static LiveLlmConfig from_env();
};

/// OpenAI-compatible chat-completions client.
class LiveLlmClient final : public LlmClient {
public:
    explicit LiveLlmClient(LiveLlmConfig config);

    BackendKind kind() const override { return BackendKind::kLive; }
    std::string fingerprint() const override;
    Completion complete(const ChatRequest& request) const override;

private:
    LiveLlmConfig config_;
};

/// First line of every prompt the mock understands: "### task: <name>".
inline constexpr std::string_view kTaskHeader = "### task: ";

/// Deterministic stand-in for the judge/tagger LLM: a pure function of the
/// prompt text and its seed. It reads the structured fields our templates
/// emit, so its verdicts respond to the evidence (coverage features and
/// similar-user support) instead of being pure noise. Not a model of any
/// real LLM.
class MockLlmClient final : public LlmClient {
public:
    using IdfFn = std::function<double(const std::string&)>;

    explicit MockLlmClient(std::uint64_t seed, IdfFn idf = {});

    BackendKind kind() const override { return BackendKind::kMock; }
    std::string fingerprint() const override;
    Completion complete(const ChatRequest& request) const override;

    /// Latent match strength for one candidate: larger means a better match.
    static double match_strength(double cov_plus, double cov_minus, double support);

private:
    Completion tags(const std::string& prompt) const;
    Completion judge_one(const std::string& prompt) const;
    Completion judge_slate(const std::string& prompt) const;

    std::uint64_t seed_;
    IdfFn idf_;
};

}  // namespace r3rec
