#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "helpers.hpp"
#include "r3rec/common.hpp"
#include "r3rec/memory.hpp"
#include "r3rec/text.hpp"

using namespace r3rec;

namespace {

UserSketch sketch_of(const std::string& id, const std::vector<std::string>& tokens, Embedding dense) {
    UserSketch s;
    s.user_id = id;
    s.text = "intents: none | likes: " + join_tokens(tokens, ", ");
    for (const auto& t : tokens) ++s.sparse[t];
    s.dense = std::move(dense);
    return s;
}

const std::vector<std::vector<std::string>> kToyDocs = {{"space", "robots", "space"},
                                                        {"farm", "crops"},
                                                        {"space", "farm"},
                                                        {"robots", "battle", "arena", "robots"},
                                                        {"puzzle"}};

MemoryIndex toy_index() {
    MemoryIndex idx;
    for (std::size_t i = 0; i < kToyDocs.size(); ++i) {
        idx.add(sketch_of("d" + std::to_string(i), kToyDocs[i], Embedding({1.0, static_cast<double>(i)})));
    }
    idx.freeze();
    return idx;
}

struct RandomMemory {
    MemoryIndex index;
    std::vector<std::vector<std::string>> docs;
};

RandomMemory random_memory(Rng& rng, std::size_t users, std::size_t vocab) {
    RandomMemory m;
    for (std::size_t u = 0; u < users; ++u) {
        std::vector<std::string> doc;
        const std::size_t len = 1 + rng.uniform_index(12);
        for (std::size_t i = 0; i < len; ++i) {
            // Skewed draw so popular terms have large document frequencies.
            const auto r = rng.uniform01();
            doc.push_back("t" + std::to_string(static_cast<std::size_t>(r * r * static_cast<double>(vocab))));
        }
        m.docs.push_back(doc);
        m.index.add(sketch_of("u" + std::to_string(1000 + u), doc, testutil::to_embedding(testutil::random_vec(rng, 8))));
    }
    m.index.freeze();
    return m;
}

}  // namespace

TEST(Bm25, ToyCorpusHandValues) {
    const auto idx = toy_index();
    TokenBag q{{"space", 1}, {"robots", 1}};
    const double expected[] = {1.918929444024712, 0.0, 0.9395274254529659, 1.0137006432518842, 0.0};
    for (std::size_t d = 0; d < 5; ++d) {
        EXPECT_NEAR(idx.bm25(q, d), expected[d], 1e-9) << d;
        EXPECT_NEAR(idx.bm25(q, d), oracle::bm25({"space", "robots"}, kToyDocs[d], kToyDocs, 1.2, 0.75), 1e-12);
    }
    EXPECT_NEAR(idx.average_length(), 12.0 / 5.0, 1e-15);
    EXPECT_NEAR(idx.idf("space"), std::log(1.0 + 3.5 / 2.5), 1e-15);
}

TEST(Bm25, RepeatedQueryTokensCountOnce) {
    const auto idx = toy_index();
    EXPECT_DOUBLE_EQ(idx.bm25({{"space", 3}}, 0), idx.bm25({{"space", 1}}, 0));
}

TEST(Hybrid, DegenerateMixes) {
    EXPECT_EQ(hybrid_similarity(3.0, 4.0, 0.2, 0.0), 0.2);
    EXPECT_EQ(hybrid_similarity(3.0, 4.0, 0.2, 1.0), 0.75);
    EXPECT_DOUBLE_EQ(hybrid_similarity(3.0, 4.0, 0.2, 0.5), 0.475);
}

TEST(Hybrid, LambdaZeroRanksByCosine) {
    Rng rng(4);
    auto m = random_memory(rng, 60, 30);
    RetrievalConfig cfg;
    cfg.lambda_mix = 0.0;
    cfg.bm25_cutoff = 0.0;
    const auto* self = m.index.find("u1000");
    const auto r = m.index.retrieve("u1000", cfg);
    for (const auto& n : r.ranked) EXPECT_EQ(n.sim, cosine(self->dense, m.index.find(n.user_id)->dense));
    for (std::size_t i = 1; i < r.ranked.size(); ++i) EXPECT_GE(r.ranked[i - 1].sim, r.ranked[i].sim);
}

TEST(Retrieval, PrunedEqualsExhaustive) {
    Rng rng(21);
    auto m = random_memory(rng, 200, 60);
    for (double cutoff : {0.1, 0.25, 0.5}) {
        RetrievalConfig cfg;
        cfg.bm25_cutoff = cutoff;
        for (std::size_t u = 0; u < 200; ++u) {
            const std::string id = "u" + std::to_string(1000 + u);
            const auto* q = m.index.find(id);
            // Exhaustive: score every other document with the formula.
            std::vector<std::pair<double, std::string>> all;
            double z = 0.0;
            std::vector<double> bm(200);
            for (std::size_t d = 0; d < 200; ++d) {
                bm[d] = m.index.bm25(q->sparse, d);
                if (d != u) z = std::max(z, bm[d]);
            }
            z = std::max(z, 1e-12);
            for (std::size_t d = 0; d < 200; ++d) {
                if (d == u || bm[d] / z < cutoff) continue;
                const auto& e = m.index.entries()[d];
                all.emplace_back(hybrid_similarity(bm[d], z, cosine(q->dense, e.dense), cfg.lambda_mix), e.user_id);
            }
            std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
                return a.first != b.first ? a.first > b.first : a.second < b.second;
            });
            if (all.size() > cfg.k) all.resize(cfg.k);
            const auto r = m.index.retrieve(id, cfg);
            ASSERT_EQ(r.ranked.size(), all.size()) << id;
            for (std::size_t i = 0; i < all.size(); ++i) {
                EXPECT_EQ(r.ranked[i].user_id, all[i].second);
                EXPECT_EQ(r.ranked[i].sim, all[i].first);
            }
        }
    }
}

TEST(Retrieval, NeverReturnsSelfAndRequiresFreeze) {
    MemoryIndex idx;
    idx.add(sketch_of("a", {"x"}, Embedding({1.0, 0.0})));
    EXPECT_THROW(idx.retrieve("a", {}), InvalidInput);
    idx.add(sketch_of("b", {"x"}, Embedding({1.0, 0.0})));
    idx.freeze();
    EXPECT_THROW(idx.add(sketch_of("c", {"x"}, Embedding({1.0, 0.0}))), InvalidInput);
    const auto r = idx.retrieve("a", {});
    ASSERT_EQ(r.ranked.size(), 1u);
    EXPECT_EQ(r.ranked[0].user_id, "b");
}

TEST(Mmr, MatchesBruteForce) {
    Rng rng(31);
    for (double lambda : {0.0, 0.5, 1.0}) {
        for (int t = 0; t < 300; ++t) {
            const std::size_t n = 1 + rng.uniform_index(5);
            std::vector<double> sims;
            std::vector<oracle::Vec> vecs;
            std::vector<Embedding> emb;
            std::vector<std::string> ids;
            for (std::size_t i = 0; i < n; ++i) {
                sims.push_back(rng.uniform01());
                vecs.push_back(testutil::random_vec(rng, 3));
                emb.push_back(testutil::to_embedding(vecs.back()));
                ids.push_back("v" + std::to_string(rng.uniform_index(1000)) + "_" + std::to_string(i));
            }
            const std::size_t m = 1 + rng.uniform_index(5);
            const auto got = mmr_order(sims, emb, ids, lambda, m);
            EXPECT_EQ(got, oracle::mmr(sims, vecs, ids, lambda, m));
            EXPECT_TRUE(oracle::is_mmr_sequence(got, sims, vecs, lambda));
        }
    }
}

TEST(Mmr, DistinctCandidatePromoted) {
    const std::vector<double> sims{0.9, 0.89, 0.7};
    const std::vector<Embedding> emb{Embedding({1.0, 0.0}), Embedding({0.999, 0.01}), Embedding({0.0, 1.0})};
    const std::vector<std::string> ids{"a", "b", "c"};
    const auto order = mmr_order(sims, emb, ids, 0.5, 3);
    EXPECT_EQ(order, (std::vector<std::size_t>{0, 2, 1}));
}

TEST(Sketch, EmptyHistoryAndLikes) {
    const HashedEmbeddingProvider p(8);
    IntentProfile prof;
    const auto empty = build_sketch("u", prof, {}, {}, p);
    EXPECT_EQ(empty.text, "intents: none");
    EXPECT_TRUE(empty.dense.is_zero());

    prof.top_intents = {{"action", 0.7}, {"drama", 0.3}};
    ItemKeywords kw{{"i1", {"space robots", "lasers"}}, {"i2", {"farm"}}, {"i3", {"sad"}}};
    std::vector<InteractionEvent> h = {{"u", "i1", 5, 10, 1}, {"u", "i3", 1, 20, -1}, {"u", "i2", 5, 30, 1}};
    const auto s = build_sketch("u", prof, h, kw, p);
    EXPECT_EQ(s.text, "intents: action, drama | likes: farm, space robots, lasers");
    EXPECT_EQ(sketch_likes(s.text), (std::vector<std::string>{"farm", "space robots", "lasers"}));
    EXPECT_EQ(s.sparse.count("sad"), 0u);
    EXPECT_EQ(s.sparse.at("robots"), 1u);
}

TEST(MemoryPersistence, RoundTripAndCorruption) {
    Rng rng(40);
    auto m = random_memory(rng, 30, 20);
    testutil::TempDir dir("memory");
    const HashedEmbeddingProvider p(8);
    m.index.save(dir.path(), 7, p);
    const auto loaded = MemoryIndex::load(dir.path());
    ASSERT_EQ(loaded.size(), m.index.size());
    RetrievalConfig cfg;
    for (const auto& e : m.index.entries()) {
        const auto a = m.index.retrieve(e.user_id, cfg);
        const auto b = loaded.retrieve(e.user_id, cfg);
        ASSERT_EQ(a.ranked.size(), b.ranked.size());
        for (std::size_t i = 0; i < a.ranked.size(); ++i) EXPECT_EQ(a.ranked[i].sim, b.ranked[i].sim);
        EXPECT_EQ(a.mmr_order, b.mmr_order);
    }
    {
        std::fstream f(dir.path() / "postings.bin", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(-1, std::ios::end);
        f.put('\x7f');
    }
    EXPECT_THROW(MemoryIndex::load(dir.path()), ParseError);
}

TEST(RetrievalConfig, Validation) {
    RetrievalConfig c;
    c.lambda_mix = 1.5;
    EXPECT_THROW(c.validate(), InvalidInput);
    c = {};
    c.k = 0;
    EXPECT_THROW(c.validate(), InvalidInput);
}
