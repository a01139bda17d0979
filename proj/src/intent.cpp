#include "r3rec/intent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "r3rec/common.hpp"

namespace r3rec {

double DecayKernel::operator()(double delta_seconds) const {
    if (delta_seconds < 0) throw InvalidInput("decay kernel evaluated at negative lag");
    if (half_life_days <= 0) throw InvalidInput("decay half-life must be positive");
    return std::exp2(-delta_seconds / (half_life_days * static_cast<double>(kSecondsPerDay)));
}

EvidenceMap signed_evidence(std::span<const InteractionEvent> window, const Catalog& catalog,
                            const DecayKernel& kernel, std::int64_t reference_time) {
    EvidenceMap evidence;
    for (const auto& e : window) {
        if (e.timestamp > reference_time) {
            throw InvalidInput("event at " + std::to_string(e.timestamp) + " is newer than the reference time");
        }
        const double w = kernel(static_cast<double>(reference_time - e.timestamp));
        auto add = [&](const std::string& category) {
            auto& ev = evidence[category];
            (e.sign > 0 ? ev.positive : ev.negative) += w;
        };
        const ItemMeta* item = catalog.find(e.item_id);
        if (!item || item->categories.empty()) {
            add(kUnknownCategory);
            continue;
        }
        // An item listing a category twice still counts once for it.
        std::vector<std::string> cats = item->categories;
        std::sort(cats.begin(), cats.end());
        cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
        for (const auto& c : cats) add(c);
    }
    return evidence;
}

WeightMap intent_weights(const EvidenceMap& evidence, double kappa) {
    if (evidence.empty()) throw InvalidInput("intent_weights needs non-empty evidence");
    double max_logit = -std::numeric_limits<double>::infinity();
    for (const auto& [k, ev] : evidence) max_logit = std::max(max_logit, kappa * ev.net());
    WeightMap weights;
    double total = 0.0;
    for (const auto& [k, ev] : evidence) {
        const double w = std::exp(kappa * ev.net() - max_logit);
        weights[k] = w;
        total += w;
    }
    for (auto& [k, w] : weights) w /= total;
    return weights;
}

WeightMap uniform_intent_weights(const EvidenceMap& evidence) {
    WeightMap weights;
    for (const auto& [k, ev] : evidence) weights[k] = 1.0 / static_cast<double>(evidence.size());
    return weights;
}

Embedding intent_vector(const WeightMap& weights, const std::map<std::string, Embedding>& category_embeddings) {
    if (weights.empty()) throw InvalidInput("intent_vector needs at least one weighted category");
    std::vector<Embedding> vectors;
    std::vector<double> w;
    std::size_t dim = 0;
    for (const auto& [k, pi] : weights) {
        auto it = category_embeddings.find(k);
        if (it == category_embeddings.end()) throw InvalidInput("no embedding for category: " + k);
        dim = it->second.dimension();
        vectors.push_back(it->second);
        w.push_back(pi);
    }
    return weighted_sum(vectors, w, dim);
}

RankedWeights top_intents(const WeightMap& weights, std::size_t n) {
    if (n < 1) throw InvalidInput("n_intent must be >= 1");
    RankedWeights ranked(weights.begin(), weights.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > n) ranked.resize(n);
    return ranked;
}

std::span<const InteractionEvent> recent_window(std::span<const InteractionEvent> history,
                                                std::int64_t reference_time, double window_months,
                                                std::size_t h_max) {
    const double horizon = window_months * kDaysPerMonth * static_cast<double>(kSecondsPerDay);
    std::size_t begin = history.size();
    while (begin > 0 && history.size() - begin < h_max &&
           static_cast<double>(reference_time - history[begin - 1].timestamp) <= horizon) {
        --begin;
    }
    return history.subspan(begin);
}

IntentProfile build_intent_profile(const std::string& user_id, std::span<const InteractionEvent> history,
                                   const Catalog& catalog, const EmbeddingProvider& provider,
                                   const IntentConfig& config, bool uniform) {
    IntentProfile profile;
    profile.user_id = user_id;
    profile.kappa = config.kappa;
    if (history.empty()) {
        profile.intent_vector = Embedding::zeros(provider.dimension());
        return profile;
    }
    profile.reference_time = history.back().timestamp;
    const auto window = recent_window(history, profile.reference_time, config.window_months, config.h_max);
    profile.window_events = window.size();
    profile.evidence = signed_evidence(window, catalog, DecayKernel{config.half_life_days}, profile.reference_time);
    if (profile.evidence.empty()) {
        profile.intent_vector = Embedding::zeros(provider.dimension());
        return profile;
    }
    profile.weights = uniform ? uniform_intent_weights(profile.evidence) : intent_weights(profile.evidence, config.kappa);

    std::map<std::string, Embedding> category_embeddings;
    for (const auto& [k, pi] : profile.weights) category_embeddings.emplace(k, provider.embed(k));
    profile.intent_vector = intent_vector(profile.weights, category_embeddings);
    profile.top_intents = top_intents(profile.weights, config.n_intent);
    return profile;
}

Json intent_profile_to_json(const IntentProfile& p) {
    Json evidence = Json::object();
    for (const auto& [k, ev] : p.evidence) evidence[k] = {ev.positive, ev.negative};
    Json top = Json::array();
    for (const auto& [k, w] : p.top_intents) top.push_back({k, w});
    return {{"user_id", p.user_id},
            {"reference_time", p.reference_time},
            {"window_events", p.window_events},
            {"kappa", p.kappa},
            {"top_intents", top},
            {"evidence", evidence},
            {"weights", p.weights},
            {"intent_vector", p.intent_vector.values()}};
}

IntentProfile intent_profile_from_json(const Json& row) {
    IntentProfile p;
    p.user_id = row.at("user_id").get<std::string>();
    p.reference_time = row.at("reference_time").get<std::int64_t>();
    p.window_events = row.at("window_events").get<std::size_t>();
    p.kappa = row.at("kappa").get<double>();
    for (const auto& t : row.at("top_intents")) p.top_intents.emplace_back(t.at(0).get<std::string>(), t.at(1).get<double>());
    for (const auto& [k, v] : row.at("evidence").items()) p.evidence[k] = {v.at(0).get<double>(), v.at(1).get<double>()};
    p.weights = row.at("weights").get<WeightMap>();
    p.intent_vector = Embedding(row.at("intent_vector").get<std::vector<double>>());
    return p;
}

}  // namespace r3rec
