#include "r3rec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "r3rec/common.hpp"
#include "r3rec/text.hpp"

namespace r3rec {

std::size_t rank_of(std::span<const std::string> ranked, const std::string& ground_truth) {
    auto it = std::find(ranked.begin(), ranked.end(), ground_truth);
    if (it == ranked.end()) throw ProtocolError("ground truth " + ground_truth + " missing from the ranking");
    return static_cast<std::size_t>(it - ranked.begin()) + 1;
}

int hr_at_k(std::span<const std::string> ranked, const std::string& ground_truth, std::size_t k) {
    if (k < 1) throw InvalidInput("k must be >= 1");
    if (ranked.empty()) throw InvalidInput("empty ranking");
    return rank_of(ranked, ground_truth) <= k ? 1 : 0;
}

double ndcg_at_k(std::span<const std::string> ranked, const std::string& ground_truth, std::size_t k) {
    if (k < 1) throw InvalidInput("k must be >= 1");
    if (ranked.empty()) throw InvalidInput("empty ranking");
    const auto r = rank_of(ranked, ground_truth);
    return r <= k ? 1.0 / std::log2(1.0 + static_cast<double>(r)) : 0.0;
}

bool AblationConfig::any() const {
    return disable_item_semantics || disable_similar_users || disable_multilevel_intent || disable_polarity;
}

std::string AblationConfig::name() const {
    std::vector<std::string> parts;
    if (disable_item_semantics) parts.emplace_back("disable_item_semantics");
    if (disable_similar_users) parts.emplace_back("disable_similar_users");
    if (disable_multilevel_intent) parts.emplace_back("disable_multilevel_intent");
    if (disable_polarity) parts.emplace_back("disable_polarity");
    return parts.empty() ? "full" : join_tokens(parts, "+");
}

AblationConfig AblationConfig::parse(const std::string& name) {
    AblationConfig a;
    if (name.empty() || name == "full") return a;
    for (const auto& raw : split(name, '+')) {
        const auto part = std::string(trim(raw));
        if (part == "disable_item_semantics") {
            a.disable_item_semantics = true;
        } else if (part == "disable_similar_users") {
            a.disable_similar_users = true;
        } else if (part == "disable_multilevel_intent") {
            a.disable_multilevel_intent = true;
        } else if (part == "disable_polarity") {
            a.disable_polarity = true;
        } else {
            throw InvalidInput("unknown ablation switch: " + part);
        }
    }
    return a;
}

double account_cost(std::size_t input_tokens, std::size_t output_tokens, const PriceTable& prices) {
    return static_cast<double>(input_tokens) / 1000.0 * prices.input_per_1k +
           static_cast<double>(output_tokens) / 1000.0 * prices.output_per_1k;
}

MetricReport aggregate_outcomes(std::span<const InstanceOutcome> outcomes, const PriceTable& prices) {
    MetricReport r;
    r.prices = prices;
    double hr1 = 0, hr5 = 0, hr10 = 0, ndcg5 = 0;
    for (const auto& o : outcomes) {
        r.input_tokens += o.input_tokens;
        r.output_tokens += o.output_tokens;
        r.requests += o.requests;
        r.max_output_request = std::max(r.max_output_request, o.max_output_request);
        if (o.failed) {
            ++r.n_failed;
            continue;
        }
        ++r.n_instances;
        hr1 += o.rank <= 1;
        hr5 += o.rank <= 5;
        hr10 += o.rank <= 10;
        if (o.rank <= 5) ndcg5 += 1.0 / std::log2(1.0 + static_cast<double>(o.rank));
    }
    if (r.n_instances == 0) throw InvalidInput("no evaluation instance was ranked successfully");
    const double n = static_cast<double>(r.n_instances);
    r.hr1 = hr1 / n;
    r.hr5 = hr5 / n;
    r.hr10 = hr10 / n;
    r.ndcg5 = ndcg5 / n;
    if (r.requests) {
        r.mean_input_per_request = static_cast<double>(r.input_tokens) / static_cast<double>(r.requests);
        r.mean_output_per_request = static_cast<double>(r.output_tokens) / static_cast<double>(r.requests);
    }
    r.cost = account_cost(r.input_tokens, r.output_tokens, prices);
    return r;
}

Json MetricReport::to_json() const {
    return {{"format", "r3rec.metric_report"},
            {"version", 1},
            {"metrics", {{"hr@1", hr1}, {"hr@5", hr5}, {"hr@10", hr10}, {"ndcg@5", ndcg5}}},
            {"n_instances", n_instances},
            {"n_failed", n_failed},
            {"config_hash", config_hash},
            {"seed", seed},
            {"ablation", ablation},
            {"backend", backend},
            {"template_hash", template_hash},
            {"tokens",
             {{"input", input_tokens},
              {"output", output_tokens},
              {"requests", requests},
              {"max_output_request", max_output_request},
              {"mean_input_per_request", mean_input_per_request},
              {"mean_output_per_request", mean_output_per_request}}},
            {"cost", {{"usd", cost}, {"input_per_1k", prices.input_per_1k}, {"output_per_1k", prices.output_per_1k}}}};
}

MetricReport MetricReport::from_json(const Json& doc) {
    if (doc.value("format", "") != "r3rec.metric_report") throw ParseError("not a metric report");
    MetricReport r;
    const auto& m = doc.at("metrics");
    r.hr1 = m.at("hr@1").get<double>();
    r.hr5 = m.at("hr@5").get<double>();
    r.hr10 = m.at("hr@10").get<double>();
    r.ndcg5 = m.at("ndcg@5").get<double>();
    r.n_instances = doc.at("n_instances").get<std::size_t>();
    r.n_failed = doc.at("n_failed").get<std::size_t>();
    r.config_hash = doc.at("config_hash").get<std::string>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.ablation = doc.at("ablation").get<std::string>();
    r.backend = doc.at("backend").get<std::string>();
    r.template_hash = doc.at("template_hash").get<std::string>();
    const auto& t = doc.at("tokens");
    r.input_tokens = t.at("input").get<std::size_t>();
    r.output_tokens = t.at("output").get<std::size_t>();
    r.requests = t.at("requests").get<std::size_t>();
    r.max_output_request = t.at("max_output_request").get<int>();
    r.mean_input_per_request = t.at("mean_input_per_request").get<double>();
    r.mean_output_per_request = t.at("mean_output_per_request").get<double>();
    const auto& c = doc.at("cost");
    r.cost = c.at("usd").get<double>();
    r.prices = {c.at("input_per_1k").get<double>(), c.at("output_per_1k").get<double>()};
    return r;
}

std::string MetricReport::to_table() const {
    std::ostringstream out;
    out << "ablation   " << ablation << "\n"
        << "instances  " << n_instances << " (failed " << n_failed << ")\n"
        << "HR@1       " << format_fixed(hr1, 4) << "\n"
        << "HR@5       " << format_fixed(hr5, 4) << "\n"
        << "HR@10      " << format_fixed(hr10, 4) << "\n"
        << "NDCG@5     " << format_fixed(ndcg5, 4) << "\n"
        << "requests   " << requests << "\n"
        << "tokens in  " << input_tokens << " (" << format_fixed(mean_input_per_request, 1) << " per request)\n"
        << "tokens out " << output_tokens << " (" << format_fixed(mean_output_per_request, 1) << " per request)\n"
        << "cost USD   " << format_fixed(cost, 6) << "\n"
        << "config     " << config_hash << "  seed " << seed << "  backend " << backend << "\n";
    return out.str();
}

SignTest paired_sign_test(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw InvalidInput("paired test needs equal-length hit vectors");
    SignTest t;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] && !b[i]) {
            ++t.wins;
        } else if (!a[i] && b[i]) {
            ++t.losses;
        } else {
            ++t.ties;
        }
    }
    const std::size_t n = t.wins + t.losses;
    if (n == 0) return t;
    // P(X <= min(w, l)) under Binomial(n, 1/2), doubled; log space for large n.
    const std::size_t k = std::min(t.wins, t.losses);
    double tail = 0.0;
    for (std::size_t i = 0; i <= k; ++i) {
        const double log_term = std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(i) + 1) -
                                std::lgamma(static_cast<double>(n - i) + 1) - static_cast<double>(n) * std::log(2.0);
        tail += std::exp(log_term);
    }
    t.p_value = std::min(1.0, 2.0 * tail);
    return t;
}

Json compare_reports(const MetricReport& base, const MetricReport& other) {
    Json out = {{"base", base.ablation}, {"other", other.ablation}};
    const std::pair<const char*, std::pair<double, double>> rows[] = {{"hr@1", {base.hr1, other.hr1}},
                                                                      {"hr@5", {base.hr5, other.hr5}},
                                                                      {"hr@10", {base.hr10, other.hr10}},
                                                                      {"ndcg@5", {base.ndcg5, other.ndcg5}}};
    for (const auto& [name, values] : rows) {
        const auto [b, o] = values;
        Json rel = nullptr;
        if (b != 0.0) rel = (o - b) / b * 100.0;
        out["metrics"][name] = {{"base", b}, {"other", o}, {"absolute_delta", o - b}, {"relative_delta_percent", rel}};
    }
    return out;
}

}  // namespace r3rec
