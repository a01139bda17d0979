#pragma once
/// @file reasoner.hpp
/// @brief Evidence assembly, coverage features, prompt rendering, verdict
/// parsing, calibration, and candidate ranking.

#include <array>
#include <atomic>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "r3rec/embedding.hpp"
#include "r3rec/intent.hpp"
#include "r3rec/io.hpp"
#include "r3rec/llm.hpp"
#include "r3rec/templates.hpp"

namespace r3rec {

enum class VerdictLabel { kNoMatch = 0, kPartial = 1, kStrong = 2 };

std::string_view verdict_label_name(VerdictLabel label);

/// Probabilities of (NO, PARTIAL, STRONG).
using VerdictProbs = std::array<double, 3>;

/// 0 * P(No) + 0.5 * P(Partial) + 1 * P(Strong).
double verdict_score(const VerdictProbs& probs);

VerdictLabel argmax_label(const VerdictProbs& probs);

/// softmax(log(max(p, 1e-9)) / T). Throws InvalidInput unless T > 0.
VerdictProbs calibrate(const VerdictProbs& probs, double temperature);

struct Verdict {
    VerdictLabel label = VerdictLabel::kNoMatch;
    VerdictProbs probs{1.0, 0.0, 0.0};
    std::string rationale;
    double raw_score = 0.0;
    double calibrated_score = 0.0;
    bool parse_error = false;
};

/// Fills raw_score, and calibrated_score from probs at temperature T.
void finalize_verdict(Verdict& verdict, double temperature);

/// Maximum pairwise cosine; 0 when either side is empty.
double max_pair_cosine(std::span<const Embedding> keywords, std::span<const Embedding> keyphrases);

struct Coverage {
    double plus = 0.0;
    double minus = 0.0;
};

Coverage coverage_features(std::span<const Embedding> liked_keywords, std::span<const Embedding> disliked_keywords,
                           std::span<const Embedding> keyphrases);

struct NeighborSummary {
    std::string user_id;
    std::string sketch;
};

/// Per-user half of the evidence set, shared by every candidate.
struct UserEvidence {
    std::string user_id;
    RankedWeights top_intents;
    RankedWeights short_liked, short_disliked;
    RankedWeights long_liked, long_disliked;
    std::vector<NeighborSummary> neighbors;  // MMR order
};

struct CandidateEvidence {
    std::string item_id;
    std::vector<std::string> keyphrases;
    double cov_plus = 0.0;
    double cov_minus = 0.0;
};

/// Prompt sections rendered from the user evidence.
std::string render_intents(const UserEvidence& user);
std::string render_polarity(const UserEvidence& user);
std::string render_neighbors(const UserEvidence& user);
std::string render_candidate(const CandidateEvidence& candidate);
std::string render_slate_line(std::size_t index, const CandidateEvidence& candidate);

/// Per-candidate judge prompt.
std::string assemble_prompt(const UserEvidence& user, const CandidateEvidence& candidate,
                            const TemplateRegistry& templates, std::string_view template_id = kJudgeTemplate);

/// One prompt covering the whole pool.
std::string assemble_slate_prompt(const UserEvidence& user, std::span<const CandidateEvidence> candidates,
                                  const TemplateRegistry& templates, std::string_view template_id = kSlateTemplate);

struct ParsedVerdict {
    bool ok = false;
    VerdictLabel label = VerdictLabel::kNoMatch;
    std::string rationale;
};

/// Reads the leading NO / PARTIAL / STRONG word and the rationale after it.
ParsedVerdict parse_verdict_text(std::string_view text);

/// Label probabilities from a token's top alternatives (a token counts for a
/// label when it is a prefix of the label's name). Returns false when none
/// of them names a label.
bool probs_from_logprobs(const TokenLogprob& token, VerdictProbs& probs);

/// One letter (N / P / S) per candidate; false unless exactly `n` letters.
bool parse_slate_text(std::string_view text, std::size_t n, std::vector<VerdictLabel>& labels);

struct TokenUsage {
    std::size_t input = 0;
    std::size_t output = 0;
    std::size_t requests = 0;
    int max_output_request = 0;  // largest max_tokens requested

    void add(const TokenUsage& other);
};

struct JudgeOptions {
    double llm_temperature = 0.0;
    int max_tokens = 20;
    double calibration_temperature = 1.0;
    bool batched = true;
    std::size_t max_in_flight = 4;
    bool logprobs = true;
};

/// Per-candidate judgement. An unparseable reply is retried once, then
/// becomes NoMatch with parse_error set. Transport failures propagate.
Verdict judge(const std::string& prompt, const LlmClient& client, const JudgeOptions& options, TokenUsage& usage);

/// Slate judgement of `n` candidates with the same retry rule.
std::vector<Verdict> judge_slate(const std::string& prompt, std::size_t n, const LlmClient& client,
                                 const JudgeOptions& options, TokenUsage& usage);

struct ScoredCandidate {
    std::string item_id;
    double score = 0.0;  // calibrated
    double raw_score = 0.0;
    double cov_plus = 0.0;
    double cov_minus = 0.0;
    VerdictLabel label = VerdictLabel::kNoMatch;
    bool parse_error = false;
    std::string rationale;
};

struct Ranking {
    std::vector<ScoredCandidate> ranked;
    TokenUsage usage;
    std::vector<std::string> prompts;
    std::vector<std::string> replies;
};

/// Sort order: calibrated score descending, then cov_plus - cov_minus
/// descending, then item_id.
void sort_ranking(std::vector<ScoredCandidate>& ranked);

/// Scores every candidate (one slate request, or one request per candidate
/// with at most max_in_flight concurrent) and sorts.
Ranking rank_candidates(const UserEvidence& user, std::span<const CandidateEvidence> candidates,
                        const LlmClient& client, const TemplateRegistry& templates, const JudgeOptions& options);

/// Grid search for the calibration temperature minimizing binary
/// cross-entropy between calibrated scores and 0/1 relevance. Ties pick the
/// earlier grid entry.
double fit_temperature(std::span<const VerdictProbs> probs, std::span<const int> relevant,
                       std::span<const double> grid);

Json verdict_to_json(const Verdict& verdict);

}  // namespace r3rec
