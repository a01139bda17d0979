#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "r3rec/common.hpp"
#include "r3rec/polarity.hpp"

using namespace r3rec;

namespace {

constexpr std::int64_t kDay = 86400;

InteractionEvent ev(std::string item, std::int64_t t, int sign) { return {"u", std::move(item), 0.0, t, sign}; }

std::vector<AlignmentSample> random_samples(Rng& rng, std::size_t n, std::size_t d) {
    std::vector<AlignmentSample> out;
    for (std::size_t i = 0; i < n; ++i) {
        AlignmentSample s{Eigen::VectorXd(d), Eigen::VectorXd(d), Eigen::VectorXd(d)};
        for (std::size_t j = 0; j < d; ++j) {
            s.intent[j] = rng.normal();
            s.short_polarity[j] = rng.normal();
            s.long_polarity[j] = rng.normal();
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

TEST(KeywordIdf, SmoothedFormula) {
    ItemKeywords kw{{"i1", {"space", "robots"}}, {"i2", {"space"}}, {"i3", {"farm"}}};
    const KeywordIdf idf(kw, 4);
    EXPECT_NEAR(idf.idf("space"), std::log(5.0 / 3.0) + 1.0, 1e-15);
    EXPECT_NEAR(idf.idf("unseen"), std::log(5.0) + 1.0, 1e-15);
}

TEST(TimeAwareTfidf, HandComputed) {
    ItemKeywords kw{{"i1", {"space", "robots"}}, {"i2", {"space", "space"}}, {"i3", {"farm"}}};
    const KeywordIdf idf(kw, 3);
    const DecayKernel kernel{30.0};
    const std::int64_t t_ref = 90 * kDay;
    std::vector<InteractionEvent> h = {ev("i1", t_ref - 30 * kDay, 1), ev("i2", t_ref, 1), ev("i3", t_ref, -1)};
    const auto w = time_aware_tfidf(h, kw, idf, kernel, t_ref);
    // "space" is carried by both liked items: (0.5 + 1) * idf; counted once per event.
    EXPECT_NEAR(w.positive.at("space"), 1.5 * (std::log(4.0 / 3.0) + 1.0), 1e-12);
    EXPECT_NEAR(w.positive.at("robots"), 0.5 * (std::log(2.0) + 1.0), 1e-12);
    EXPECT_NEAR(w.negative.at("farm"), std::log(2.0) + 1.0, 1e-12);
    EXPECT_EQ(w.negative.count("space"), 0u);
}

TEST(PolarityVector, CentroidDifference) {
    SignedWeights w;
    w.positive = {{"x", 3.0}, {"y", 1.0}};
    w.negative = {{"z", 2.0}};
    std::map<std::string, Embedding> e{{"x", Embedding({1, 0, 0})}, {"y", Embedding({0, 1, 0})},
                                       {"z", Embedding({0, 0, 1})}};
    const auto v = polarity_vector(w, [&](const std::string& k) { return e.at(k); }, 3);
    EXPECT_NEAR(v.positive_centroid[0], 0.75, 1e-15);
    EXPECT_NEAR(v.positive_centroid[1], 0.25, 1e-15);
    EXPECT_NEAR(v.polarity[2], -1.0, 1e-15);
}

TEST(PolarityVector, EmptySideIsZero) {
    SignedWeights w;
    w.positive = {{"x", 1.0}};
    const auto v = polarity_vector(w, [](const std::string&) { return Embedding({0.6, 0.8}); }, 2);
    EXPECT_TRUE(v.negative_centroid.is_zero());
    EXPECT_EQ(v.polarity, v.positive_centroid);
}

TEST(TopKeywords, OrderAndTies) {
    const auto top = top_keywords({{"b", 1.0}, {"a", 1.0}, {"c", 2.0}, {"d", 0.5}}, 3);
    ASSERT_EQ(top.size(), 3u);
    EXPECT_EQ(top[0].first, "c");
    EXPECT_EQ(top[1].first, "a");
    EXPECT_EQ(top[2].first, "b");
}

TEST(PolarityState, HorizonsSplitByAge) {
    ItemKeywords kw{{"old", {"vintage"}}, {"new", {"fresh"}}};
    const KeywordIdf idf(kw, 2);
    const HashedEmbeddingProvider p(16);
    std::vector<InteractionEvent> h = {ev("old", 10 * kDay, 1), ev("new", 200 * kDay, 1)};
    const auto s = build_polarity_state("u", h, kw, idf, p, {});
    EXPECT_EQ(s.short_term.events, 1u);
    EXPECT_EQ(s.long_term.events, 2u);
    EXPECT_EQ(s.short_term.weights.positive.count("vintage"), 0u);
    EXPECT_EQ(s.long_term.weights.positive.count("vintage"), 1u);
    ASSERT_FALSE(s.top_positive.empty());
    EXPECT_EQ(s.top_positive.front().first, "fresh");

    const auto back = polarity_state_from_json(polarity_state_to_json(s));
    EXPECT_EQ(back.top_positive, s.top_positive);
    EXPECT_EQ(back.long_term.vectors.polarity, s.long_term.vectors.polarity);
}

TEST(HorizonConfig, Validation) {
    EXPECT_THROW((HorizonConfig{12.0, 1.0}).validate(), InvalidInput);
    EXPECT_THROW((HorizonConfig{0.0, 1.0}).validate(), InvalidInput);
    EXPECT_NO_THROW((HorizonConfig{1.0, 12.0}).validate());
}

TEST(Adapter, IdentityFusesBySum) {
    const auto a = FusionAdapter::identity(3, 3);
    const auto h = fuse(Embedding({1, 2, 3}), Embedding({1, 0, 0}), Embedding({0, 0, 1}), a);
    EXPECT_EQ(h.values(), (std::vector<double>{2, 2, 4}));
    EXPECT_THROW(fuse(Embedding({1, 2}), Embedding({1, 0, 0}), Embedding({0, 0, 1}), a), InvalidInput);
}

TEST(Adapter, JsonRoundTripIsExact) {
    const auto a = FusionAdapter::random(6, 4, 17);
    const auto b = FusionAdapter::from_json(a.to_json("abc"));
    EXPECT_EQ(a.w_intent, b.w_intent);
    EXPECT_EQ(a.w_short, b.w_short);
    EXPECT_EQ(a.w_long, b.w_long);
    EXPECT_EQ(a.bias, b.bias);
}

TEST(Adapter, GradientMatchesCentralDifferences) {
    Rng rng(99);
    const double h = 1e-5;
    for (int trial = 0; trial < 20; ++trial) {
        auto samples = random_samples(rng, 5, 8);
        FusionAdapter a = FusionAdapter::random(8, 4, 1000 + trial);
        const auto g = alignment_gradient(a, samples);
        Eigen::MatrixXd FusionAdapter::*blocks[3] = {&FusionAdapter::w_intent, &FusionAdapter::w_short,
                                                     &FusionAdapter::w_long};
        const Eigen::MatrixXd* grads[3] = {&g.d_intent, &g.d_short, &g.d_long};
        for (int b = 0; b < 3; ++b) {
            Eigen::MatrixXd numeric((a.*blocks[b]).rows(), (a.*blocks[b]).cols());
            for (Eigen::Index r = 0; r < numeric.rows(); ++r) {
                for (Eigen::Index c = 0; c < numeric.cols(); ++c) {
                    FusionAdapter plus = a, minus = a;
                    (plus.*blocks[b])(r, c) += h;
                    (minus.*blocks[b])(r, c) -= h;
                    numeric(r, c) = (alignment_loss(plus, samples) - alignment_loss(minus, samples)) / (2 * h);
                }
            }
            const double rel = (numeric - *grads[b]).norm() / std::max(1e-12, numeric.norm());
            EXPECT_LT(rel, 1e-4) << "trial " << trial << " block " << b;
        }
    }
}

TEST(Adapter, LossTraceNonIncreasing) {
    Rng rng(5);
    const auto samples = random_samples(rng, 30, 8);
    AdapterTrainConfig cfg;
    cfg.fused_dim = 4;
    cfg.epochs = 100;
    cfg.seed = 3;
    const auto r = train_adapter(samples, 8, cfg);
    ASSERT_EQ(r.loss_trace.size(), 101u);
    for (std::size_t i = 1; i < r.loss_trace.size(); ++i) EXPECT_LE(r.loss_trace[i], r.loss_trace[i - 1] + 1e-15);
    EXPECT_LT(r.loss_trace.back(), r.loss_trace.front());
}

TEST(Adapter, ZeroIntentsKeepInitialization) {
    std::vector<AlignmentSample> s(3, {Eigen::VectorXd::Zero(4), Eigen::VectorXd::Ones(4), Eigen::VectorXd::Ones(4)});
    AdapterTrainConfig cfg;
    cfg.fused_dim = 2;
    cfg.seed = 1;
    const auto r = train_adapter(s, 4, cfg);
    EXPECT_EQ(r.warnings.size(), 1u);
    EXPECT_EQ(r.adapter.w_intent, FusionAdapter::random(4, 2, 1).w_intent);
    EXPECT_DOUBLE_EQ(alignment_loss(r.adapter, s), 0.0);
}

TEST(Adapter, TrainingIsDeterministic) {
    Rng rng(8);
    const auto samples = random_samples(rng, 10, 8);
    AdapterTrainConfig cfg;
    cfg.fused_dim = 4;
    cfg.epochs = 20;
    const auto a = train_adapter(samples, 8, cfg);
    const auto b = train_adapter(samples, 8, cfg);
    EXPECT_EQ(a.adapter.w_intent, b.adapter.w_intent);
    EXPECT_EQ(a.loss_trace, b.loss_trace);
}
