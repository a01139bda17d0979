#include "r3rec/polarity.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "r3rec/common.hpp"
#include "r3rec/random.hpp"

namespace r3rec {

void HorizonConfig::validate() const {
    if (!(short_months > 0.0 && short_months < long_months)) {
        throw InvalidInput("horizons need 0 < short_months < long_months");
    }
}

KeywordIdf::KeywordIdf(const ItemKeywords& item_keywords, std::size_t catalog_size) : n_items_(catalog_size) {
    for (const auto& [item, keywords] : item_keywords) {
        std::set<std::string> unique(keywords.begin(), keywords.end());
        for (const auto& w : unique) ++df_[w];
    }
}

double KeywordIdf::idf(const std::string& keyword) const {
    auto it = df_.find(keyword);
    const double df = it == df_.end() ? 0.0 : static_cast<double>(it->second);
    return std::log((static_cast<double>(n_items_) + 1.0) / (df + 1.0)) + 1.0;
}

SignedWeights time_aware_tfidf(std::span<const InteractionEvent> horizon_events, const ItemKeywords& item_keywords,
                               const KeywordIdf& idf, const DecayKernel& kernel, std::int64_t reference_time) {
    std::map<std::string, double> pos_mass, neg_mass;
    for (const auto& e : horizon_events) {
        if (e.timestamp > reference_time) throw InvalidInput("event newer than the reference time");
        auto it = item_keywords.find(e.item_id);
        if (it == item_keywords.end()) continue;
        const double w = kernel(static_cast<double>(reference_time - e.timestamp));
        std::set<std::string> unique(it->second.begin(), it->second.end());
        auto& target = e.sign > 0 ? pos_mass : neg_mass;
        for (const auto& kw : unique) target[kw] += w;
    }
    SignedWeights out;
    for (const auto& [w, mass] : pos_mass) out.positive[w] = mass * idf.idf(w);
    for (const auto& [w, mass] : neg_mass) out.negative[w] = mass * idf.idf(w);
    return out;
}

namespace {

Embedding centroid(const std::map<std::string, double>& weights, const EmbedFn& embed, std::size_t dimension) {
    double total = 0.0;
    for (const auto& [w, omega] : weights) total += omega;
    if (weights.empty() || total <= 0.0) return Embedding::zeros(dimension);
    std::vector<double> acc(dimension, 0.0);
    for (const auto& [w, omega] : weights) {
        const Embedding e = embed(w);
        if (e.dimension() != dimension) throw InvalidInput("keyword embedding dimension mismatch");
        const double share = omega / total;
        for (std::size_t i = 0; i < dimension; ++i) acc[i] += share * e[i];
    }
    return Embedding(std::move(acc));
}

HorizonPolarity mine_horizon(std::span<const InteractionEvent> history, double months,
                             const ItemKeywords& item_keywords, const KeywordIdf& idf, const DecayKernel& kernel,
                             std::int64_t reference_time, const EmbedFn& embed, std::size_t dimension) {
    const double horizon = months * kDaysPerMonth * static_cast<double>(kSecondsPerDay);
    std::size_t begin = history.size();
    while (begin > 0 && static_cast<double>(reference_time - history[begin - 1].timestamp) <= horizon) --begin;
    const auto window = history.subspan(begin);

    HorizonPolarity h;
    h.events = window.size();
    h.weights = time_aware_tfidf(window, item_keywords, idf, kernel, reference_time);
    h.vectors = polarity_vector(h.weights, embed, dimension);
    return h;
}

RankedWeights merged_top(const std::map<std::string, double>& a, const std::map<std::string, double>& b,
                         std::size_t n) {
    std::map<std::string, double> merged = a;
    for (const auto& [w, v] : b) merged[w] += v;
    return top_keywords(merged, n);
}

Json ranked_to_json(const RankedWeights& r) {
    Json out = Json::array();
    for (const auto& [k, w] : r) out.push_back({k, w});
    return out;
}

RankedWeights ranked_from_json(const Json& j) {
    RankedWeights r;
    for (const auto& t : j) r.emplace_back(t.at(0).get<std::string>(), t.at(1).get<double>());
    return r;
}

Json horizon_to_json(const HorizonPolarity& h) {
    return {{"events", h.events},
            {"positive", h.weights.positive},
            {"negative", h.weights.negative},
            {"p_plus", h.vectors.positive_centroid.values()},
            {"p_minus", h.vectors.negative_centroid.values()}};
}

HorizonPolarity horizon_from_json(const Json& j) {
    HorizonPolarity h;
    h.events = j.at("events").get<std::size_t>();
    h.weights.positive = j.at("positive").get<std::map<std::string, double>>();
    h.weights.negative = j.at("negative").get<std::map<std::string, double>>();
    h.vectors.positive_centroid = Embedding(j.at("p_plus").get<std::vector<double>>());
    h.vectors.negative_centroid = Embedding(j.at("p_minus").get<std::vector<double>>());
    h.vectors.polarity = subtract(h.vectors.positive_centroid, h.vectors.negative_centroid);
    return h;
}

}  // namespace

PolarityVectors polarity_vector(const SignedWeights& weights, const EmbedFn& embed, std::size_t dimension) {
    PolarityVectors v;
    v.positive_centroid = centroid(weights.positive, embed, dimension);
    v.negative_centroid = centroid(weights.negative, embed, dimension);
    v.polarity = subtract(v.positive_centroid, v.negative_centroid);
    return v;
}

RankedWeights top_keywords(const std::map<std::string, double>& weights, std::size_t n) {
    RankedWeights ranked(weights.begin(), weights.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > n) ranked.resize(n);
    return ranked;
}

PolarityState build_polarity_state(const std::string& user_id, std::span<const InteractionEvent> history,
                                   const ItemKeywords& item_keywords, const KeywordIdf& idf,
                                   const EmbeddingProvider& provider, const PolarityConfig& config) {
    config.horizons.validate();
    const std::size_t dim = provider.dimension();
    if (history.empty()) return empty_polarity_state(user_id, dim);

    const DecayKernel kernel{config.half_life_days};
    const auto reference = history.back().timestamp;
    const EmbedFn embed = [&provider](const std::string& w) { return provider.embed(w); };

    PolarityState s;
    s.user_id = user_id;
    s.short_term = mine_horizon(history, config.horizons.short_months, item_keywords, idf, kernel, reference, embed, dim);
    s.long_term = mine_horizon(history, config.horizons.long_months, item_keywords, idf, kernel, reference, embed, dim);
    s.top_positive = merged_top(s.short_term.weights.positive, s.long_term.weights.positive, config.n_keywords);
    s.top_negative = merged_top(s.short_term.weights.negative, s.long_term.weights.negative, config.n_keywords);
    return s;
}

PolarityState empty_polarity_state(const std::string& user_id, std::size_t dimension) {
    PolarityState s;
    s.user_id = user_id;
    for (auto* h : {&s.short_term, &s.long_term}) {
        h->vectors.positive_centroid = Embedding::zeros(dimension);
        h->vectors.negative_centroid = Embedding::zeros(dimension);
        h->vectors.polarity = Embedding::zeros(dimension);
    }
    return s;
}

Json polarity_state_to_json(const PolarityState& s) {
    return {{"user_id", s.user_id},
            {"short", horizon_to_json(s.short_term)},
            {"long", horizon_to_json(s.long_term)},
            {"top_positive", ranked_to_json(s.top_positive)},
            {"top_negative", ranked_to_json(s.top_negative)}};
}

PolarityState polarity_state_from_json(const Json& row) {
    PolarityState s;
    s.user_id = row.at("user_id").get<std::string>();
    s.short_term = horizon_from_json(row.at("short"));
    s.long_term = horizon_from_json(row.at("long"));
    s.top_positive = ranked_from_json(row.at("top_positive"));
    s.top_negative = ranked_from_json(row.at("top_negative"));
    return s;
}

// ---------------------------------------------------------------------------

FusionAdapter FusionAdapter::identity(std::size_t input_dim, std::size_t fused_dim) {
    FusionAdapter a;
    const auto r = static_cast<Eigen::Index>(fused_dim);
    const auto c = static_cast<Eigen::Index>(input_dim);
    a.w_intent = Eigen::MatrixXd::Identity(r, c);
    a.w_short = Eigen::MatrixXd::Identity(r, c);
    a.w_long = Eigen::MatrixXd::Identity(r, c);
    a.bias = Eigen::VectorXd::Zero(r);
    return a;
}

FusionAdapter FusionAdapter::random(std::size_t input_dim, std::size_t fused_dim, std::uint64_t seed) {
    if (input_dim == 0 || fused_dim == 0) throw InvalidInput("adapter dimensions must be positive");
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
    const auto r = static_cast<Eigen::Index>(fused_dim);
    const auto c = static_cast<Eigen::Index>(input_dim);
    auto block = [&] {
        Eigen::MatrixXd m(r, c);
        // Row-major fill order so the stream does not depend on Eigen's storage order.
        for (Eigen::Index i = 0; i < r; ++i) {
            for (Eigen::Index j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
        }
        return m;
    };
    FusionAdapter a;
    a.w_intent = block();
    a.w_short = block();
    a.w_long = block();
    a.bias = Eigen::VectorXd::Zero(r);
    return a;
}

namespace {

Json matrix_to_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j, Eigen::Index rows, Eigen::Index cols) {
    if (static_cast<Eigen::Index>(j.size()) != rows) throw ParseError("adapter matrix has wrong row count");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto row = j.at(static_cast<std::size_t>(i)).get<std::vector<double>>();
        if (static_cast<Eigen::Index>(row.size()) != cols) throw ParseError("adapter matrix has wrong column count");
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)];
    }
    return m;
}

}  // namespace

Json FusionAdapter::to_json(const std::string& config_hash) const {
    std::vector<double> b(static_cast<std::size_t>(bias.size()));
    for (Eigen::Index i = 0; i < bias.size(); ++i) b[static_cast<std::size_t>(i)] = bias(i);
    return {{"format", "r3rec.fusion_adapter"},
            {"version", 1},
            {"config_hash", config_hash},
            {"input_dim", input_dim()},
            {"fused_dim", fused_dim()},
            {"w_intent", matrix_to_json(w_intent)},
            {"w_short", matrix_to_json(w_short)},
            {"w_long", matrix_to_json(w_long)},
            {"bias", b}};
}

FusionAdapter FusionAdapter::from_json(const Json& doc) {
    if (doc.value("format", "") != "r3rec.fusion_adapter" || doc.value("version", 0) != 1) {
        throw ParseError("not a version-1 fusion adapter file");
    }
    const auto d = static_cast<Eigen::Index>(doc.at("input_dim").get<std::size_t>());
    const auto dh = static_cast<Eigen::Index>(doc.at("fused_dim").get<std::size_t>());
    FusionAdapter a;
    a.w_intent = matrix_from_json(doc.at("w_intent"), dh, d);
    a.w_short = matrix_from_json(doc.at("w_short"), dh, d);
    a.w_long = matrix_from_json(doc.at("w_long"), dh, d);
    const auto b = doc.at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(b.size()) != dh) throw ParseError("adapter bias has wrong length");
    a.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), dh);
    return a;
}

namespace {

Eigen::VectorXd to_eigen(const Embedding& e) {
    return Eigen::Map<const Eigen::VectorXd>(e.values().data(), static_cast<Eigen::Index>(e.dimension()));
}

}  // namespace

Embedding fuse(const Embedding& intent, const Embedding& short_polarity, const Embedding& long_polarity,
               const FusionAdapter& adapter) {
    const auto d = adapter.input_dim();
    if (intent.dimension() != d || short_polarity.dimension() != d || long_polarity.dimension() != d) {
        throw InvalidInput("fuse: input dimension does not match the adapter");
    }
    const Eigen::VectorXd h = adapter.w_intent * to_eigen(intent) + adapter.w_short * to_eigen(short_polarity) +
                              adapter.w_long * to_eigen(long_polarity) + adapter.bias;
    return Embedding(std::vector<double>(h.data(), h.data() + h.size()));
}

AlignmentSample make_alignment_sample(const Embedding& intent, const Embedding& short_polarity,
                                      const Embedding& long_polarity) {
    return {to_eigen(intent), to_eigen(short_polarity), to_eigen(long_polarity)};
}

namespace {

// Accumulates loss and (optionally) gradients in sample order.
double loss_and_gradient(const FusionAdapter& adapter, std::span<const AlignmentSample> samples,
                         AdapterGradient* grad) {
    if (grad) {
        grad->d_intent = Eigen::MatrixXd::Zero(adapter.w_intent.rows(), adapter.w_intent.cols());
        grad->d_short = Eigen::MatrixXd::Zero(adapter.w_short.rows(), adapter.w_short.cols());
        grad->d_long = Eigen::MatrixXd::Zero(adapter.w_long.rows(), adapter.w_long.cols());
    }
    if (samples.empty()) return 0.0;
    const auto n = static_cast<Eigen::Index>(samples.size());
    const Eigen::Index d = adapter.w_intent.cols();
    Eigen::MatrixXd x(d, n), qs(d, n), ql(d, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        x.col(j) = samples[j].intent;
        qs.col(j) = samples[j].short_polarity;
        ql.col(j) = samples[j].long_polarity;
    }
    // One matrix product per block for the whole batch.
    const Eigen::MatrixXd a = adapter.w_intent * x;
    const Eigen::MatrixXd c[2] = {adapter.w_short * qs, adapter.w_long * ql};
    Eigen::MatrixXd da, dc[2];
    if (grad) {
        da = Eigen::MatrixXd::Zero(a.rows(), n);
        dc[0] = Eigen::MatrixXd::Zero(a.rows(), n);
        dc[1] = Eigen::MatrixXd::Zero(a.rows(), n);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    double loss = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double na = a.col(j).norm();
        for (int l = 0; l < 2; ++l) {
            const double nc = c[l].col(j).norm();
            if (na == 0.0 || nc == 0.0) continue;
            const double cos = a.col(j).dot(c[l].col(j)) / (na * nc);
            loss -= inv_n * cos;
            if (!grad) continue;
            da.col(j) -= inv_n * (c[l].col(j) / (na * nc) - cos * a.col(j) / (na * na));
            dc[l].col(j) -= inv_n * (a.col(j) / (na * nc) - cos * c[l].col(j) / (nc * nc));
        }
    }
    if (grad) {
        grad->d_intent.noalias() = da * x.transpose();
        grad->d_short.noalias() = dc[0] * qs.transpose();
        grad->d_long.noalias() = dc[1] * ql.transpose();
    }
    return loss;
}

}  // namespace

double alignment_loss(const FusionAdapter& adapter, std::span<const AlignmentSample> samples) {
    return loss_and_gradient(adapter, samples, nullptr);
}

AdapterGradient alignment_gradient(const FusionAdapter& adapter, std::span<const AlignmentSample> samples) {
    AdapterGradient g;
    loss_and_gradient(adapter, samples, &g);
    return g;
}

AdapterTrainResult train_adapter(std::span<const AlignmentSample> samples, std::size_t input_dim,
                                 const AdapterTrainConfig& config) {
    if (config.learning_rate <= 0.0 || config.epochs < 0) throw InvalidInput("adapter training needs lr > 0, epochs >= 0");
    AdapterTrainResult result;
    result.adapter = config.identity_init ? FusionAdapter::identity(input_dim, config.fused_dim)
                                          : FusionAdapter::random(input_dim, config.fused_dim, config.seed);
    for (const auto& s : samples) {
        if (static_cast<std::size_t>(s.intent.size()) != input_dim ||
            static_cast<std::size_t>(s.short_polarity.size()) != input_dim ||
            static_cast<std::size_t>(s.long_polarity.size()) != input_dim) {
            throw InvalidInput("alignment sample dimension does not match the adapter input");
        }
    }
    const bool any_signal = std::any_of(samples.begin(), samples.end(),
                                        [](const AlignmentSample& s) { return s.intent.squaredNorm() > 0.0; });
    if (!any_signal) {
        result.warnings.push_back("no profile has a nonzero intent vector; adapter left at initialization");
        log_warn(result.warnings.back());
        result.loss_trace.push_back(alignment_loss(result.adapter, samples));
        return result;
    }
    AdapterGradient grad;
    result.loss_trace.reserve(static_cast<std::size_t>(config.epochs) + 1);
    result.loss_trace.push_back(loss_and_gradient(result.adapter, samples, &grad));
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        result.adapter.w_intent -= config.learning_rate * grad.d_intent;
        result.adapter.w_short -= config.learning_rate * grad.d_short;
        result.adapter.w_long -= config.learning_rate * grad.d_long;
        result.loss_trace.push_back(loss_and_gradient(result.adapter, samples, &grad));
    }
    return result;
}

}  // namespace r3rec
