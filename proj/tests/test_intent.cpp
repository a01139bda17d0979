#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "r3rec/common.hpp"
#include "r3rec/intent.hpp"

using namespace r3rec;

namespace {

constexpr std::int64_t kDay = 86400;

Catalog small_catalog() {
    Catalog c;
    c.add({"a1", "A1", {"action"}, "", {}});
    c.add({"a2", "A2", {"action"}, "", {}});
    c.add({"d1", "D1", {"drama"}, "", {}});
    c.add({"m1", "M1", {"action", "drama"}, "", {}});
    c.add({"n1", "N1", {}, "", {}});
    return c;
}

InteractionEvent ev(std::string item, std::int64_t t, int sign) { return {"u", std::move(item), 0.0, t, sign}; }

}  // namespace

TEST(Decay, HalfLife) {
    const DecayKernel k{30.0};
    EXPECT_DOUBLE_EQ(k(0.0), 1.0);
    EXPECT_NEAR(k(30.0 * kDay), 0.5, 1e-15);
    EXPECT_NEAR(k(60.0 * kDay), 0.25, 1e-15);
}

TEST(IntentWeights, TwoCategoryExample) {
    EvidenceMap e{{"k1", {1.0, 0.0}}, {"k2", {0.0, 0.0}}};
    const auto w = intent_weights(e, 1.0);
    EXPECT_NEAR(w.at("k1"), 0.73106, 1e-4);
    EXPECT_NEAR(w.at("k2"), 0.26894, 1e-4);
}

TEST(IntentWeights, MatchesPlainSoftmax) {
    Rng rng(3);
    for (int t = 0; t < 200; ++t) {
        EvidenceMap e;
        std::vector<double> net;
        const std::size_t n = 1 + rng.uniform_index(8);
        for (std::size_t i = 0; i < n; ++i) {
            const CategoryEvidence g{3.0 * rng.uniform01(), 3.0 * rng.uniform01()};
            e["c" + std::to_string(i)] = g;
            net.push_back(g.net());
        }
        const double kappa = 0.25 + 3.0 * rng.uniform01();
        const auto w = intent_weights(e, kappa);
        const auto want = oracle::softmax(net, kappa);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(w.at("c" + std::to_string(i)), want[i], 1e-12);
    }
}

TEST(IntentWeights, MixedFeedbackIsPenalized) {
    EvidenceMap e{{"clean", {1.0, 0.0}}, {"mixed", {1.0, 0.9}}};
    const auto w = intent_weights(e, 1.0);
    EXPECT_GT(w.at("clean"), w.at("mixed"));
}

TEST(IntentWeights, LargeEvidenceStaysFinite) {
    EvidenceMap e{{"a", {1000.0, 0.0}}, {"b", {0.0, 1000.0}}};
    const auto w = intent_weights(e, 4.0);
    EXPECT_NEAR(w.at("a") + w.at("b"), 1.0, 1e-12);
    EXPECT_TRUE(std::isfinite(w.at("b")));
}

TEST(IntentWeights, Uniform) {
    EvidenceMap e{{"a", {5.0, 0.0}}, {"b", {0.0, 1.0}}, {"c", {0.0, 0.0}}};
    for (const auto& [k, v] : uniform_intent_weights(e)) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(SignedEvidence, DecayAndSignsPerCategory) {
    const auto catalog = small_catalog();
    const DecayKernel kernel{30.0};
    const std::int64_t t_ref = 100 * kDay;
    std::vector<InteractionEvent> window = {ev("a1", t_ref - 30 * kDay, 1), ev("m1", t_ref, -1),
                                            ev("n1", t_ref, 1), ev("zz", t_ref, 1)};
    const auto e = signed_evidence(window, catalog, kernel, t_ref);
    EXPECT_NEAR(e.at("action").positive, 0.5, 1e-15);
    EXPECT_NEAR(e.at("action").negative, 1.0, 1e-15);
    EXPECT_NEAR(e.at("drama").negative, 1.0, 1e-15);
    EXPECT_NEAR(e.at(kUnknownCategory).positive, 2.0, 1e-15);
    EXPECT_THROW(signed_evidence(window, catalog, kernel, t_ref - 1), InvalidInput);
}

TEST(RecentWindow, BoundsByAgeAndCount) {
    std::vector<InteractionEvent> h;
    for (int d = 0; d < 500; ++d) h.push_back(ev("a1", static_cast<std::int64_t>(d) * kDay + 1, 1));
    const std::int64_t t_ref = h.back().timestamp;
    const auto w = recent_window(h, t_ref, 12.0, 1000);
    EXPECT_EQ(w.front().timestamp, t_ref - 360 * kDay);
    EXPECT_EQ(recent_window(h, t_ref, 12.0, 100).size(), 100u);
}

TEST(TopIntents, TieBreakByName) {
    WeightMap w{{"b", 0.3}, {"a", 0.3}, {"c", 0.4}};
    const auto top = top_intents(w, 2);
    ASSERT_EQ(top.size(), 2u);
    EXPECT_EQ(top[0].first, "c");
    EXPECT_EQ(top[1].first, "a");
}

TEST(IntentVector, WeightedSumOfCategoryEmbeddings) {
    std::map<std::string, Embedding> emb{{"a", Embedding({1.0, 0.0})}, {"b", Embedding({0.0, 2.0})}};
    const auto z = intent_vector({{"a", 0.25}, {"b", 0.75}}, emb);
    EXPECT_DOUBLE_EQ(z[0], 0.25);
    EXPECT_DOUBLE_EQ(z[1], 1.5);
    EXPECT_THROW(intent_vector({{"c", 1.0}}, emb), InvalidInput);
}

TEST(IntentProfile, EmptyHistory) {
    const HashedEmbeddingProvider p(16);
    const auto prof = build_intent_profile("u", {}, small_catalog(), p, {});
    EXPECT_TRUE(prof.weights.empty());
    EXPECT_TRUE(prof.intent_vector.is_zero());
    EXPECT_EQ(prof.intent_vector.dimension(), 16u);
}

TEST(IntentProfile, JsonRoundTripAndDeterminism) {
    const HashedEmbeddingProvider p(16);
    std::vector<InteractionEvent> h = {ev("a1", 10 * kDay, 1), ev("d1", 20 * kDay, -1), ev("a2", 21 * kDay, 1)};
    const auto a = build_intent_profile("u", h, small_catalog(), p, {});
    const auto b = build_intent_profile("u", h, small_catalog(), p, {});
    EXPECT_EQ(a.intent_vector, b.intent_vector);
    EXPECT_EQ(a.top_intents.front().first, "action");
    const auto back = intent_profile_from_json(intent_profile_to_json(a));
    EXPECT_EQ(back.weights, a.weights);
    EXPECT_EQ(back.intent_vector, a.intent_vector);
}
