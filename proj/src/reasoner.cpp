#include "r3rec/reasoner.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>

#include "r3rec/common.hpp"
#include "r3rec/parallel.hpp"
#include "r3rec/text.hpp"

namespace r3rec {

namespace {

constexpr double kProbFloor = 1e-9;
constexpr std::array<std::string_view, 3> kLabelNames{"NO", "PARTIAL", "STRONG"};

std::string upper(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

VerdictProbs one_hot(VerdictLabel label) {
    VerdictProbs p{0.0, 0.0, 0.0};
    p[static_cast<std::size_t>(label)] = 1.0;
    return p;
}

std::string ranked_names(const RankedWeights& r) {
    if (r.empty()) return "none";
    std::string out;
    for (const auto& [k, w] : r) {
        if (!out.empty()) out += ", ";
        out += k;
    }
    return out;
}

}  // namespace

std::string_view verdict_label_name(VerdictLabel label) { return kLabelNames[static_cast<std::size_t>(label)]; }

double verdict_score(const VerdictProbs& p) { return 0.5 * p[1] + 1.0 * p[2]; }

VerdictLabel argmax_label(const VerdictProbs& p) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < 3; ++i) {
        if (p[i] > p[best]) best = i;
    }
    return static_cast<VerdictLabel>(best);
}

VerdictProbs calibrate(const VerdictProbs& probs, double temperature) {
    if (!(temperature > 0.0)) throw InvalidInput("calibration temperature must be positive");
    VerdictProbs z;
    for (std::size_t i = 0; i < 3; ++i) z[i] = std::log(std::max(probs[i], kProbFloor)) / temperature;
    const double m = std::max({z[0], z[1], z[2]});
    double total = 0.0;
    for (auto& v : z) {
        v = std::exp(v - m);
        total += v;
    }
    for (auto& v : z) v /= total;
    return z;
}

void finalize_verdict(Verdict& v, double temperature) {
    v.label = argmax_label(v.probs);
    v.raw_score = verdict_score(v.probs);
    v.calibrated_score = temperature == 1.0 ? v.raw_score : verdict_score(calibrate(v.probs, temperature));
}

double max_pair_cosine(std::span<const Embedding> keywords, std::span<const Embedding> keyphrases) {
    if (keywords.empty() || keyphrases.empty()) return 0.0;
    double best = -1.0;
    for (const auto& w : keywords) {
        for (const auto& k : keyphrases) best = std::max(best, cosine(w, k));
    }
    return best;
}

Coverage coverage_features(std::span<const Embedding> liked, std::span<const Embedding> disliked,
                           std::span<const Embedding> keyphrases) {
    return {max_pair_cosine(liked, keyphrases), max_pair_cosine(disliked, keyphrases)};
}

// ---------------------------------------------------------------------------
// Prompt rendering

std::string render_intents(const UserEvidence& user) {
    std::string out;
    for (const auto& [k, w] : user.top_intents) {
        if (k == kUnknownCategory) continue;
        out += "- " + k + " (weight " + format_fixed(w, 3) + ")\n";
    }
    if (out.empty()) return "none";
    out.pop_back();
    return out;
}

std::string render_polarity(const UserEvidence& user) {
    return "short horizon liked: " + ranked_names(user.short_liked) + "\n" +
           "short horizon disliked: " + ranked_names(user.short_disliked) + "\n" +
           "long horizon liked: " + ranked_names(user.long_liked) + "\n" +
           "long horizon disliked: " + ranked_names(user.long_disliked);
}

std::string render_neighbors(const UserEvidence& user) {
    if (user.neighbors.empty()) return "none";
    std::string out;
    for (const auto& n : user.neighbors) out += "- user " + n.user_id + ": " + n.sketch + "\n";
    out.pop_back();
    return out;
}

namespace {

std::string keyphrase_list(const CandidateEvidence& c) {
    return c.keyphrases.empty() ? std::string("none") : join_tokens(c.keyphrases, "; ");
}

std::string coverage_text(const CandidateEvidence& c) {
    return "cov_plus=" + format_fixed(c.cov_plus, 3) + " cov_minus=" + format_fixed(c.cov_minus, 3);
}

std::map<std::string, std::string> user_vars(const UserEvidence& user) {
    return {{"intents", render_intents(user)}, {"polarity", render_polarity(user)}, {"neighbors", render_neighbors(user)}};
}

}  // namespace

std::string render_candidate(const CandidateEvidence& c) {
    return "item: " + c.item_id + "\nkeyphrases: " + keyphrase_list(c) + "\ncoverage: " + coverage_text(c);
}

std::string render_slate_line(std::size_t index, const CandidateEvidence& c) {
    const std::string num = (index + 1 < 10 ? "C0" : "C") + std::to_string(index + 1);
    return num + " | item " + c.item_id + " | keyphrases: " + keyphrase_list(c) + " | " + coverage_text(c);
}

std::string assemble_prompt(const UserEvidence& user, const CandidateEvidence& candidate,
                            const TemplateRegistry& templates, std::string_view template_id) {
    auto vars = user_vars(user);
    vars["candidate"] = render_candidate(candidate);
    return render_template(templates.get(template_id), vars);
}

std::string assemble_slate_prompt(const UserEvidence& user, std::span<const CandidateEvidence> candidates,
                                  const TemplateRegistry& templates, std::string_view template_id) {
    auto vars = user_vars(user);
    std::string lines;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (i) lines.push_back('\n');
        lines += render_slate_line(i, candidates[i]);
    }
    vars["candidates"] = lines;
    return render_template(templates.get(template_id), vars);
}

// ---------------------------------------------------------------------------
// Parsing

ParsedVerdict parse_verdict_text(std::string_view text) {
    ParsedVerdict out;
    auto t = trim(text);
    std::size_t end = 0;
    while (end < t.size() && std::isalpha(static_cast<unsigned char>(t[end]))) ++end;
    const auto word = upper(t.substr(0, end));
    for (std::size_t i = 0; i < 3; ++i) {
        if (word == kLabelNames[i]) {
            out.ok = true;
            out.label = static_cast<VerdictLabel>(i);
        }
    }
    if (!out.ok) return out;
    auto rest = trim(t.substr(end));
    // An optional trailing "MATCH" and separators before the rationale.
    if (upper(rest.substr(0, 5)) == "MATCH") rest = trim(rest.substr(5));
    while (!rest.empty() && (rest.front() == '-' || rest.front() == ':' || rest.front() == ',' ||
                             static_cast<unsigned char>(rest.front()) >= 0x80)) {
        rest = trim(rest.substr(1));
    }
    out.rationale = std::string(rest);
    return out;
}

bool probs_from_logprobs(const TokenLogprob& token, VerdictProbs& probs) {
    VerdictProbs mass{0.0, 0.0, 0.0};
    auto credit = [&](const std::string& tok, double logprob) {
        const auto t = upper(trim(tok));
        if (t.empty()) return;
        for (std::size_t i = 0; i < 3; ++i) {
            if (kLabelNames[i].substr(0, t.size()) == t) {
                mass[i] += std::exp(logprob);
                return;
            }
        }
    };
    if (token.top.empty()) {
        credit(token.token, token.logprob);
    } else {
        for (const auto& alt : token.top) credit(alt.token, alt.logprob);
    }
    const double total = mass[0] + mass[1] + mass[2];
    if (!(total > 0.0)) return false;
    for (std::size_t i = 0; i < 3; ++i) probs[i] = mass[i] / total;
    return true;
}

bool parse_slate_text(std::string_view text, std::size_t n, std::vector<VerdictLabel>& labels) {
    labels.clear();
    for (char c : text) {
        const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        if (u == 'N') {
            labels.push_back(VerdictLabel::kNoMatch);
        } else if (u == 'P') {
            labels.push_back(VerdictLabel::kPartial);
        } else if (u == 'S') {
            labels.push_back(VerdictLabel::kStrong);
        } else if (!(std::isspace(static_cast<unsigned char>(c)) || c == ',')) {
            labels.clear();
            return false;
        }
    }
    return labels.size() == n;
}

void TokenUsage::add(const TokenUsage& o) {
    input += o.input;
    output += o.output;
    requests += o.requests;
    max_output_request = std::max(max_output_request, o.max_output_request);
}

// ---------------------------------------------------------------------------
// Judging

namespace {

ChatRequest judge_request(const std::string& prompt, const JudgeOptions& options) {
    ChatRequest r;
    r.prompt = prompt;
    r.max_tokens = options.max_tokens;
    r.temperature = options.llm_temperature;
    r.logprobs = options.logprobs;
    return r;
}

Completion call(const LlmClient& client, const ChatRequest& request, TokenUsage& usage) {
    auto c = client.complete(request);
    usage.input += c.prompt_tokens;
    usage.output += c.completion_tokens;
    usage.requests += 1;
    usage.max_output_request = std::max(usage.max_output_request, request.max_tokens);
    return c;
}

}  // namespace

Verdict judge(const std::string& prompt, const LlmClient& client, const JudgeOptions& options, TokenUsage& usage) {
    const auto request = judge_request(prompt, options);
    Verdict v;
    for (int attempt = 0; attempt < 2; ++attempt) {
        const auto reply = call(client, request, usage);
        const auto parsed = parse_verdict_text(reply.text);
        if (!parsed.ok) continue;
        v.rationale = parsed.rationale;
        if (reply.tokens.empty() || !probs_from_logprobs(reply.tokens.front(), v.probs)) {
            v.probs = one_hot(parsed.label);
        }
        finalize_verdict(v, options.calibration_temperature);
        return v;
    }
    log_warn("judge reply unparseable after retry; scoring as NO");
    v.probs = one_hot(VerdictLabel::kNoMatch);
    v.parse_error = true;
    finalize_verdict(v, options.calibration_temperature);
    return v;
}

std::vector<Verdict> judge_slate(const std::string& prompt, std::size_t n, const LlmClient& client,
                                 const JudgeOptions& options, TokenUsage& usage) {
    const auto request = judge_request(prompt, options);
    std::vector<Verdict> verdicts(n);
    for (int attempt = 0; attempt < 2; ++attempt) {
        const auto reply = call(client, request, usage);
        std::vector<VerdictLabel> labels;
        if (!parse_slate_text(reply.text, n, labels)) continue;
        std::vector<const TokenLogprob*> letter_tokens;
        for (const auto& t : reply.tokens) {
            const auto s = upper(trim(t.token));
            if (s == "N" || s == "P" || s == "S") letter_tokens.push_back(&t);
        }
        const bool use_logprobs = letter_tokens.size() == n;
        for (std::size_t i = 0; i < n; ++i) {
            auto& v = verdicts[i];
            if (!use_logprobs || !probs_from_logprobs(*letter_tokens[i], v.probs)) v.probs = one_hot(labels[i]);
            finalize_verdict(v, options.calibration_temperature);
        }
        return verdicts;
    }
    log_warn("slate reply unparseable after retry; scoring every candidate as NO");
    for (auto& v : verdicts) {
        v.probs = one_hot(VerdictLabel::kNoMatch);
        v.parse_error = true;
        finalize_verdict(v, options.calibration_temperature);
    }
    return verdicts;
}

void sort_ranking(std::vector<ScoredCandidate>& ranked) {
    std::sort(ranked.begin(), ranked.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        const double ma = a.cov_plus - a.cov_minus, mb = b.cov_plus - b.cov_minus;
        if (ma != mb) return ma > mb;
        return a.item_id < b.item_id;
    });
}

Ranking rank_candidates(const UserEvidence& user, std::span<const CandidateEvidence> candidates,
                        const LlmClient& client, const TemplateRegistry& templates, const JudgeOptions& options) {
    Ranking out;
    std::vector<Verdict> verdicts;
    if (options.batched) {
        out.prompts.push_back(assemble_slate_prompt(user, candidates, templates));
        verdicts = judge_slate(out.prompts.back(), candidates.size(), client, options, out.usage);
    } else {
        verdicts.resize(candidates.size());
        out.prompts.resize(candidates.size());
        std::vector<TokenUsage> usages(candidates.size());
        parallel_for(candidates.size(), options.max_in_flight, [&](std::size_t i) {
            out.prompts[i] = assemble_prompt(user, candidates[i], templates);
            verdicts[i] = judge(out.prompts[i], client, options, usages[i]);
        });
        // Merge in candidate order so totals do not depend on completion order.
        for (const auto& u : usages) out.usage.add(u);
    }
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        const auto& v = verdicts[i];
        out.ranked.push_back({c.item_id, v.calibrated_score, v.raw_score, c.cov_plus, c.cov_minus, v.label,
                              v.parse_error, v.rationale});
    }
    sort_ranking(out.ranked);
    return out;
}

double fit_temperature(std::span<const VerdictProbs> probs, std::span<const int> relevant,
                       std::span<const double> grid) {
    if (probs.size() != relevant.size()) throw InvalidInput("one relevance label per verdict expected");
    if (grid.empty()) throw InvalidInput("temperature grid is empty");
    double best_t = grid.front();
    double best_loss = std::numeric_limits<double>::infinity();
    for (double t : grid) {
        double loss = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            const double s = std::clamp(verdict_score(calibrate(probs[i], t)), kProbFloor, 1.0 - kProbFloor);
            loss -= relevant[i] ? std::log(s) : std::log(1.0 - s);
        }
        if (loss < best_loss) {
            best_loss = loss;
            best_t = t;
        }
    }
    return best_t;
}

Json verdict_to_json(const Verdict& v) {
    return {{"label", verdict_label_name(v.label)},
            {"probs", v.probs},
            {"rationale", v.rationale},
            {"raw_score", v.raw_score},
            {"calibrated_score", v.calibrated_score},
            {"parse_error", v.parse_error}};
}

}  // namespace r3rec
