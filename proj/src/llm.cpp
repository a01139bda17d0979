#include "r3rec/llm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>

#include "r3rec/common.hpp"
#include "r3rec/random.hpp"
#include "r3rec/text.hpp"

namespace r3rec {

std::string_view backend_kind_name(BackendKind kind) {
    return kind == BackendKind::kLive ? "live" : "mock";
}

namespace {

std::string env_or(const char* name, std::string fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

}  // namespace

LiveLlmConfig LiveLlmConfig::from_env() {
    LiveLlmConfig c;
    c.url = env_or("R3REC_JUDGE_URL", "");
    c.api_key = env_or("R3REC_JUDGE_API_KEY", "");
    c.model = env_or("R3REC_JUDGE_MODEL", c.model);
    return c;
}

LiveLlmClient::LiveLlmClient(LiveLlmConfig config) : config_(std::move(config)) {
    if (config_.url.empty()) throw InvalidInput("live judge backend needs an endpoint URL (R3REC_JUDGE_URL)");
}

std::string LiveLlmClient::fingerprint() const { return "live:" + config_.model; }

Completion LiveLlmClient::complete(const ChatRequest& request) const {
    Json messages = Json::array();
    if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
    messages.push_back({{"role", "user"}, {"content", request.prompt}});
    Json body = {{"model", config_.model},
                 {"messages", messages},
                 {"temperature", request.temperature},
                 {"max_tokens", request.max_tokens}};
    if (request.logprobs) {
        body["logprobs"] = true;
        body["top_logprobs"] = request.top_logprobs;
    }
    std::map<std::string, std::string> headers;
    if (!config_.api_key.empty()) headers["Authorization"] = "Bearer " + config_.api_key;

    const Json reply = post_json(config_.url, body, headers, config_.timeout_s, config_.retry);
    Completion out;
    try {
        const Json& choice = reply.at("choices").at(0);
        out.text = choice.at("message").at("content").get<std::string>();
        if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
            choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array()) {
            for (const auto& t : choice["logprobs"]["content"]) {
                TokenLogprob tok{t.at("token").get<std::string>(), t.at("logprob").get<double>(), {}};
                if (t.contains("top_logprobs")) {
                    for (const auto& alt : t["top_logprobs"]) {
                        tok.top.push_back({alt.at("token").get<std::string>(), alt.at("logprob").get<double>()});
                    }
                }
                out.tokens.push_back(std::move(tok));
            }
        }
    } catch (const Json::exception& e) {
        throw ParseError(std::string("malformed chat-completions reply: ") + e.what());
    }
    if (reply.contains("usage") && reply["usage"].is_object()) {
        out.prompt_tokens = reply["usage"].value("prompt_tokens", std::size_t{0});
        out.completion_tokens = reply["usage"].value("completion_tokens", std::size_t{0});
    } else {
        out.prompt_tokens = estimate_tokens(request.system) + estimate_tokens(request.prompt);
        out.completion_tokens = estimate_tokens(out.text);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Mock backend

namespace {

constexpr double kNoiseScale = 0.3;

std::string_view task_of(std::string_view prompt) {
    if (prompt.substr(0, kTaskHeader.size()) != kTaskHeader) return {};
    auto rest = prompt.substr(kTaskHeader.size());
    return trim(rest.substr(0, rest.find('\n')));
}

std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            out.push_back(text.substr(start));
            break;
        }
        out.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return out;
}

// Lines between "[name]" and the next "[...]" header.
std::vector<std::string_view> section(std::string_view prompt, std::string_view name) {
    std::vector<std::string_view> out;
    bool inside = false;
    for (auto line : lines_of(prompt)) {
        const auto t = trim(line);
        if (!t.empty() && t.front() == '[' && t.back() == ']') {
            inside = t.substr(1, t.size() - 2) == name;
            continue;
        }
        if (inside && !t.empty()) out.push_back(t);
    }
    return out;
}

// Value after "key:" up to the next '|' (or end of line).
std::string_view field(std::string_view line, std::string_view key) {
    const auto pos = line.find(key);
    if (pos == std::string_view::npos) return {};
    auto rest = line.substr(pos + key.size());
    return trim(rest.substr(0, rest.find('|')));
}

double number_after(std::string_view line, std::string_view key) {
    const auto pos = line.find(key);
    if (pos == std::string_view::npos) return 0.0;
    return std::strtod(std::string(line.substr(pos + key.size())).c_str(), nullptr);
}

std::set<std::string> phrase_set(std::string_view list, char sep) {
    std::set<std::string> out;
    for (const auto& p : split(list, sep)) {
        auto t = normalize_text(trim(p));
        if (!t.empty()) out.insert(std::move(t));
    }
    return out;
}

std::set<std::string> neighbor_likes(std::string_view prompt) {
    std::set<std::string> likes;
    for (auto line : section(prompt, "Similar users")) {
        auto phrases = phrase_set(field(line, "likes:"), ',');
        likes.insert(phrases.begin(), phrases.end());
    }
    return likes;
}

double support_of(const std::set<std::string>& keyphrases, const std::set<std::string>& likes) {
    if (keyphrases.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& k : keyphrases) hits += likes.count(k);
    return static_cast<double>(hits) / static_cast<double>(keyphrases.size());
}

// Logits for (NO, PARTIAL, STRONG) with seeded noise.
std::array<double, 3> verdict_logits(double strength, std::uint64_t noise_seed) {
    Rng rng(noise_seed);
    return {-strength + kNoiseScale * rng.normal(), kNoiseScale * rng.normal(), strength + kNoiseScale * rng.normal()};
}

std::array<double, 3> log_softmax(const std::array<double, 3>& z) {
    const double m = std::max({z[0], z[1], z[2]});
    const double lse = m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m) + std::exp(z[2] - m));
    return {z[0] - lse, z[1] - lse, z[2] - lse};
}

std::size_t argmax3(const std::array<double, 3>& z) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < 3; ++i) {
        if (z[i] > z[best]) best = i;
    }
    return best;
}

TokenLogprob verdict_token(const std::array<double, 3>& logits, const std::array<std::string, 3>& names) {
    const auto lp = log_softmax(logits);
    const auto best = argmax3(lp);
    TokenLogprob tok{names[best], lp[best], {}};
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lp[a] > lp[b]; });
    for (auto i : order) tok.top.push_back({names[i], lp[i]});
    return tok;
}

const char* rationale_for(std::size_t label) {
    switch (label) {
        case 2: return "its keyphrases line up with what the user and similar users liked.";
        case 1: return "it overlaps some of the user's interests but not the strongest ones.";
        default: return "its keyphrases do not match the user's liked keywords.";
    }
}

}  // namespace

MockLlmClient::MockLlmClient(std::uint64_t seed, IdfFn idf) : seed_(seed), idf_(std::move(idf)) {}

std::string MockLlmClient::fingerprint() const { return "mock:" + hex64(seed_); }

double MockLlmClient::match_strength(double cov_plus, double cov_minus, double support) {
    return 3.0 * (cov_plus - cov_minus) + 3.0 * support - 1.0;
}

Completion MockLlmClient::complete(const ChatRequest& request) const {
    const auto task = task_of(request.prompt);
    Completion out;
    if (task == "tags") {
        out = tags(request.prompt);
    } else if (task == "judge") {
        out = judge_one(request.prompt);
    } else if (task == "slate") {
        out = judge_slate(request.prompt);
    } else {
        out.text = "unsupported request";
    }
    out.prompt_tokens = estimate_tokens(request.system) + estimate_tokens(request.prompt);
    out.completion_tokens = estimate_tokens(out.text);
    if (request.max_tokens > 0 && out.completion_tokens > static_cast<std::size_t>(request.max_tokens)) {
        // Mirror a real backend's truncation at max_tokens.
        out.completion_tokens = static_cast<std::size_t>(request.max_tokens);
    }
    if (!request.logprobs) out.tokens.clear();
    return out;
}

Completion MockLlmClient::tags(const std::string& prompt) const {
    std::string text;
    for (auto line : lines_of(prompt)) {
        for (std::string_view key : {"title:", "description:"}) {
            if (line.substr(0, key.size()) == key) {
                text.append(line.substr(key.size()));
                text.push_back('\n');
            }
        }
    }
    std::map<std::string, double> tf;
    for (const auto& t : tokenize(text)) {
        if (!is_stopword(t) && t.size() > 1) tf[t] += 1.0;
    }
    std::vector<std::pair<std::string, double>> scored;
    for (const auto& [t, c] : tf) scored.emplace_back(t, c * (idf_ ? idf_(t) : 1.0));
    std::sort(scored.begin(), scored.end(), [this](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        const auto ha = mix64(fnv1a64(a.first) ^ seed_), hb = mix64(fnv1a64(b.first) ^ seed_);
        return ha != hb ? ha < hb : a.first < b.first;
    });
    Completion out;
    for (std::size_t i = 0; i < scored.size() && i < 6; ++i) {
        if (i) out.text += ", ";
        out.text += scored[i].first;
    }
    return out;
}

Completion MockLlmClient::judge_one(const std::string& prompt) const {
    const auto likes = neighbor_likes(prompt);
    std::set<std::string> keyphrases;
    double cov_plus = 0.0, cov_minus = 0.0;
    for (auto line : section(prompt, "Candidate")) {
        if (line.substr(0, 11) == "keyphrases:") keyphrases = phrase_set(field(line, "keyphrases:"), ';');
        if (line.find("cov_plus=") != std::string_view::npos) {
            cov_plus = number_after(line, "cov_plus=");
            cov_minus = number_after(line, "cov_minus=");
        }
    }
    const double strength = match_strength(cov_plus, cov_minus, support_of(keyphrases, likes));
    const auto logits = verdict_logits(strength, derive_seed(seed_, prompt));
    static const std::array<std::string, 3> names{"NO", "PARTIAL", "STRONG"};
    Completion out;
    out.tokens.push_back(verdict_token(logits, names));
    const auto label = argmax3(logits);
    out.text = names[label] + " - " + rationale_for(label);
    return out;
}

Completion MockLlmClient::judge_slate(const std::string& prompt) const {
    const auto likes = neighbor_likes(prompt);
    const std::uint64_t prompt_seed = derive_seed(seed_, prompt);
    static const std::array<std::string, 3> names{"N", "P", "S"};
    Completion out;
    std::size_t index = 0;
    for (auto line : section(prompt, "Candidates")) {
        if (line.find("cov_plus=") == std::string_view::npos) continue;
        const auto keyphrases = phrase_set(field(line, "keyphrases:"), ';');
        const double strength = match_strength(number_after(line, "cov_plus="), number_after(line, "cov_minus="),
                                               support_of(keyphrases, likes));
        const auto logits = verdict_logits(strength, derive_seed(prompt_seed, std::to_string(index)));
        auto tok = verdict_token(logits, names);
        if (index) out.text.push_back(' ');
        out.text += tok.token;
        out.tokens.push_back(std::move(tok));
        ++index;
    }
    return out;
}

}  // namespace r3rec
