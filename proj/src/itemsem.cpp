#include "r3rec/itemsem.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>

#include "r3rec/common.hpp"
#include "r3rec/text.hpp"

namespace r3rec {

std::string_view phrase_source_name(PhraseSource source) {
    switch (source) {
        case PhraseSource::kChunked: return "chunked";
        case PhraseSource::kAbstractive: return "abstractive";
        case PhraseSource::kTitle: return "title";
    }
    return "chunked";
}

namespace {

PhraseSource phrase_source_from(std::string_view name) {
    if (name == "chunked") return PhraseSource::kChunked;
    if (name == "abstractive") return PhraseSource::kAbstractive;
    if (name == "title") return PhraseSource::kTitle;
    throw ParseError("unknown phrase source: " + std::string(name));
}

std::string bigram_key(const std::string& a, const std::string& b) { return a + '\x1f' + b; }

std::string canonical_phrase(std::string_view text) { return join_tokens(tokenize(text)); }

}  // namespace

std::vector<std::string> ItemCard::texts() const {
    std::vector<std::string> out;
    out.reserve(keyphrases.size());
    for (const auto& k : keyphrases) out.push_back(k.text);
    return out;
}

std::string item_text(const ItemMeta& item) {
    if (item.description.empty()) return item.title;
    return item.title + "\n" + item.description;
}

std::vector<std::vector<std::string>> content_runs(std::string_view text) {
    std::vector<std::vector<std::string>> runs;
    for (auto& segment : tokenize_segments(text)) {
        std::vector<std::string> run;
        for (auto& t : segment) {
            if (is_stopword(t)) {
                if (!run.empty()) runs.push_back(std::move(run));
                run.clear();
            } else {
                run.push_back(std::move(t));
            }
        }
        if (!run.empty()) runs.push_back(std::move(run));
    }
    return runs;
}

// ---------------------------------------------------------------------------

void CorpusStats::add_document(std::string_view text) {
    ++documents_;
    std::set<std::string> seen;
    for (const auto& run : content_runs(text)) {
        for (std::size_t i = 0; i < run.size(); ++i) {
            ++unigrams_[run[i]];
            ++total_tokens_;
            seen.insert(run[i]);
            if (i + 1 < run.size()) ++bigrams_[bigram_key(run[i], run[i + 1])];
        }
    }
    for (const auto& t : seen) ++df_[t];
}

CorpusStats CorpusStats::from_catalog(const Catalog& catalog) {
    CorpusStats stats;
    for (const auto& item : catalog.items()) stats.add_document(item_text(item));
    return stats;
}

std::size_t CorpusStats::unigram(const std::string& token) const {
    auto it = unigrams_.find(token);
    return it == unigrams_.end() ? 0 : it->second;
}

std::size_t CorpusStats::bigram(const std::string& a, const std::string& b) const {
    auto it = bigrams_.find(bigram_key(a, b));
    return it == bigrams_.end() ? 0 : it->second;
}

std::size_t CorpusStats::document_frequency(const std::string& token) const {
    auto it = df_.find(token);
    return it == df_.end() ? 0 : it->second;
}

double CorpusStats::pmi(const std::string& a, const std::string& b) const {
    const auto ab = bigram(a, b);
    if (ab == 0) return -std::numeric_limits<double>::infinity();
    return std::log(static_cast<double>(total_tokens_) * static_cast<double>(ab) /
                    (static_cast<double>(unigram(a)) * static_cast<double>(unigram(b))));
}

double CorpusStats::idf(const std::string& token) const {
    return std::log((static_cast<double>(documents_) + 1.0) /
                    (static_cast<double>(document_frequency(token)) + 1.0)) +
           1.0;
}

std::vector<std::string> pmi_chunk(std::string_view text, const CorpusStats& stats, const ChunkConfig& config) {
    std::vector<std::string> phrases;
    std::set<std::string> seen;
    auto emit = [&](const std::vector<std::string>& tokens) {
        auto p = join_tokens(tokens);
        if (seen.insert(p).second) phrases.push_back(std::move(p));
    };
    for (const auto& run : content_runs(text)) {
        // Merging depends only on the tokens meeting at a boundary, so one
        // left-to-right pass already reaches the fixpoint.
        std::vector<std::string> current{run.front()};
        for (std::size_t i = 1; i < run.size(); ++i) {
            const bool merge = current.size() + 1 <= config.max_phrase_tokens &&
                               stats.pmi(current.back(), run[i]) >= config.tau_pmi;
            if (merge) {
                current.push_back(run[i]);
            } else {
                emit(current);
                current = {run[i]};
            }
        }
        emit(current);
    }
    return phrases;
}

std::map<std::string, double> item_tfidf(std::string_view text, const CorpusStats& stats) {
    std::map<std::string, double> tf;
    for (const auto& run : content_runs(text)) {
        for (const auto& t : run) tf[t] += 1.0;
    }
    for (auto& [t, v] : tf) v *= stats.idf(t);
    return tf;
}

std::vector<std::string> parse_tag_list(std::string_view response, std::size_t max_tags, std::size_t max_tokens) {
    std::vector<std::string> tags;
    std::set<std::string> seen;
    std::string normalized(response);
    std::replace(normalized.begin(), normalized.end(), '\n', ',');
    std::replace(normalized.begin(), normalized.end(), ';', ',');
    for (const auto& raw : split(normalized, ',')) {
        auto t = trim(raw);
        // Bullets ("-", "*") and numbering ("1.", "2)").
        while (!t.empty() && (t.front() == '-' || t.front() == '*' || t.front() == '#')) t = trim(t.substr(1));
        std::size_t digits = 0;
        while (digits < t.size() && std::isdigit(static_cast<unsigned char>(t[digits]))) ++digits;
        if (digits > 0 && digits < t.size() && (t[digits] == '.' || t[digits] == ')')) t = trim(t.substr(digits + 1));
        const auto tokens = tokenize(t);
        if (tokens.empty() || tokens.size() > max_tokens) continue;
        auto tag = join_tokens(tokens);
        if (seen.insert(tag).second) tags.push_back(std::move(tag));
        if (tags.size() == max_tags) break;
    }
    return tags;
}

std::vector<std::string> abstractive_tags(const ItemMeta& item, const LlmClient& client,
                                          const TemplateRegistry& templates, std::vector<std::string>* warnings) {
    ChatRequest request;
    request.prompt = render_template(templates.get(kTagsTemplate),
                                     {{"title", normalize_text(item.title)}, {"description", normalize_text(item.description)}});
    request.max_tokens = 60;
    request.logprobs = false;
    std::vector<std::string> tags;
    try {
        tags = parse_tag_list(client.complete(request).text);
    } catch (const Error& e) {
        if (warnings) warnings->push_back("item " + item.item_id + ": tagger failed (" + e.what() + ")");
        return {};
    }
    if (tags.empty() && warnings) {
        warnings->push_back("item " + item.item_id + ": tagger reply had no usable tags");
    }
    return tags;
}

double relevance_score(std::string_view candidate, const std::map<std::string, double>& tfidf,
                       const Embedding& candidate_embedding, const Embedding& item_centroid, double alpha) {
    double max_tfidf = 0.0;
    for (const auto& [t, v] : tfidf) max_tfidf = std::max(max_tfidf, v);
    double tfidf_norm = 0.0;
    const auto tokens = tokenize(candidate);
    if (max_tfidf > 0.0 && !tokens.empty()) {
        double sum = 0.0;
        for (const auto& t : tokens) {
            auto it = tfidf.find(t);
            if (it != tfidf.end()) sum += it->second;
        }
        tfidf_norm = std::clamp(sum / static_cast<double>(tokens.size()) / max_tfidf, 0.0, 1.0);
    }
    const double sim = std::max(0.0, cosine(candidate_embedding, item_centroid));
    return alpha * tfidf_norm + (1.0 - alpha) * sim;
}

// ---------------------------------------------------------------------------

FacilityLocation::FacilityLocation(std::vector<double> relevance, std::span<const Embedding> embeddings,
                                   double lambda)
    : relevance_(std::move(relevance)), lambda_(lambda) {
    if (relevance_.size() != embeddings.size()) throw InvalidInput("relevance and embedding counts differ");
    if (!(lambda >= 0.0)) throw InvalidInput("coverage weight must be >= 0");
    const std::size_t n = size();
    sim_.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double s = cosine(embeddings[i], embeddings[j]);
            sim_[i * n + j] = s;
            sim_[j * n + i] = s;
        }
    }
}

double FacilityLocation::value(std::span<const std::size_t> selected) const {
    if (selected.empty()) return 0.0;
    double modular = 0.0;
    for (auto c : selected) modular += relevance_[c];
    double coverage = 0.0;
    for (std::size_t q = 0; q < size(); ++q) {
        double best = 0.0;
        for (auto c : selected) best = std::max(best, similarity(q, c));
        coverage += best;
    }
    return modular + lambda_ * coverage;
}

double FacilityLocation::gain(std::size_t candidate, std::span<const std::size_t> selected) const {
    double delta = relevance_[candidate];
    for (std::size_t q = 0; q < size(); ++q) {
        double best = 0.0;
        for (auto c : selected) best = std::max(best, similarity(q, c));
        delta += lambda_ * std::max(0.0, similarity(q, candidate) - best);
    }
    return delta;
}

void SelectionConfig::validate() const {
    if (budget_min == 0 || budget_min > budget_max) throw InvalidInput("keyphrase budget needs 1 <= min <= max");
    if (!(lambda_cov >= 0.0)) throw InvalidInput("lambda_cov must be >= 0");
    if (!(eps_gain >= 0.0)) throw InvalidInput("eps_gain must be >= 0");
}

GreedyResult greedy_select(const FacilityLocation& objective, std::span<const std::string> texts,
                           const SelectionConfig& config) {
    config.validate();
    const std::size_t n = objective.size();
    if (texts.size() != n) throw InvalidInput("one text per pool entry expected");
    GreedyResult result;
    std::vector<char> taken(n, 0);
    std::set<std::string> chosen_texts;
    std::vector<double> covered(n, 0.0);  // max(0, max_{c in S} cos(q, c))
    const bool take_all = n < config.budget_min;
    double value = 0.0;

    while (result.selected.size() < config.budget_max) {
        std::size_t best = n;
        double best_gain = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            if (taken[c] || chosen_texts.count(texts[c])) continue;
            double g = objective.relevance(c);
            for (std::size_t q = 0; q < n; ++q) {
                g += objective.lambda() * std::max(0.0, objective.similarity(q, c) - covered[q]);
            }
            bool better = best == n;
            if (!better) {
                if (g > best_gain + 1e-12) {
                    better = true;
                } else if (std::abs(g - best_gain) <= 1e-12) {
                    if (objective.relevance(c) != objective.relevance(best)) {
                        better = objective.relevance(c) > objective.relevance(best);
                    } else {
                        better = texts[c] < texts[best];
                    }
                }
            }
            if (better) {
                best = c;
                best_gain = g;
            }
        }
        if (best == n) break;
        if (!take_all && result.selected.size() >= config.budget_min && best_gain < config.eps_gain) break;
        taken[best] = 1;
        chosen_texts.insert(texts[best]);
        result.selected.push_back(best);
        for (std::size_t q = 0; q < n; ++q) covered[q] = std::max(covered[q], objective.similarity(q, best));
        value += best_gain;
        result.values.push_back(value);
    }
    return result;
}

ItemCard select_keyphrases(const std::string& item_id, std::vector<KeyphraseCandidate> pool,
                           const SelectionConfig& config) {
    ItemCard card;
    card.item_id = item_id;
    card.pool_size = pool.size();
    if (pool.empty()) {
        log_warn("item " + item_id + ": empty keyphrase pool");
        return card;
    }
    std::vector<double> relevance;
    std::vector<Embedding> embeddings;
    std::vector<std::string> texts;
    for (const auto& c : pool) {
        relevance.push_back(c.relevance);
        embeddings.push_back(c.embedding);
        texts.push_back(c.text);
    }
    const FacilityLocation objective(std::move(relevance), embeddings, config.lambda_cov);
    const auto greedy = greedy_select(objective, texts, config);
    for (auto i : greedy.selected) card.keyphrases.push_back(std::move(pool[i]));
    // Recompute from scratch so the stored value does not carry the
    // incremental sum's rounding.
    card.objective_value = objective.value(greedy.selected);
    return card;
}

ItemCard distill_item(const ItemMeta& item, const CorpusStats& stats, const EmbeddingProvider& provider,
                      const LlmClient* tagger, const TemplateRegistry& templates, const DistillConfig& config,
                      std::vector<std::string>* warnings) {
    const std::string text = item_text(item);
    const auto tfidf = item_tfidf(text, stats);

    std::vector<std::pair<std::string, PhraseSource>> raw;
    for (auto& p : pmi_chunk(text, stats, config.chunk)) raw.emplace_back(std::move(p), PhraseSource::kChunked);
    if (tagger) {
        for (auto& t : abstractive_tags(item, *tagger, templates, warnings)) {
            raw.emplace_back(std::move(t), PhraseSource::kAbstractive);
        }
    }

    // Item centroid: title plus the top tf-idf tokens.
    std::vector<std::pair<std::string, double>> ranked(tfidf.begin(), tfidf.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::string centroid_text = item.title;
    for (std::size_t i = 0; i < ranked.size() && i < config.centroid_tokens; ++i) centroid_text += " " + ranked[i].first;
    const Embedding centroid =
        tokenize(centroid_text).empty() ? Embedding::zeros(provider.dimension()) : provider.embed(centroid_text);

    std::vector<KeyphraseCandidate> pool;
    std::set<std::string> seen;
    for (auto& [phrase, source] : raw) {
        auto canon = canonical_phrase(phrase);
        if (canon.empty() || !seen.insert(canon).second) continue;
        KeyphraseCandidate c;
        c.embedding = provider.embed(canon);
        c.relevance = relevance_score(canon, tfidf, c.embedding, centroid, config.alpha);
        c.text = std::move(canon);
        c.source = source;
        pool.push_back(std::move(c));
    }
    if (pool.empty() && warnings) warnings->push_back("item " + item.item_id + ": no keyphrase candidates");
    return select_keyphrases(item.item_id, std::move(pool), config.selection);
}

ItemCard title_token_card(const ItemMeta& item, const EmbeddingProvider& provider) {
    ItemCard card;
    card.item_id = item.item_id;
    std::set<std::string> seen;
    for (const auto& t : tokenize(item.title)) {
        if (is_stopword(t) || !seen.insert(t).second) continue;
        card.keyphrases.push_back({t, PhraseSource::kTitle, 0.0, provider.embed(t)});
    }
    card.pool_size = card.keyphrases.size();
    return card;
}

Json card_to_json(const ItemCard& card) {
    Json phrases = Json::array();
    for (const auto& k : card.keyphrases) {
        phrases.push_back({{"text", k.text}, {"source", phrase_source_name(k.source)}, {"relevance", k.relevance}});
    }
    return {{"item_id", card.item_id},
            {"keyphrases", phrases},
            {"objective_value", card.objective_value},
            {"pool_size", card.pool_size}};
}

ItemCard card_from_json(const Json& row, const EmbeddingProvider& provider) {
    ItemCard card;
    card.item_id = row.at("item_id").get<std::string>();
    card.objective_value = row.at("objective_value").get<double>();
    card.pool_size = row.at("pool_size").get<std::size_t>();
    for (const auto& k : row.at("keyphrases")) {
        KeyphraseCandidate c;
        c.text = k.at("text").get<std::string>();
        c.source = phrase_source_from(k.at("source").get<std::string>());
        c.relevance = k.at("relevance").get<double>();
        c.embedding = provider.embed(c.text);
        card.keyphrases.push_back(std::move(c));
    }
    return card;
}

ItemKeywords card_keywords(std::span<const ItemCard> cards) {
    ItemKeywords out;
    for (const auto& c : cards) out[c.item_id] = c.texts();
    return out;
}

}  // namespace r3rec
