#include <gtest/gtest.h>

#include <fstream>

#include "helpers.hpp"
#include "r3rec/common.hpp"
#include "r3rec/config.hpp"

using namespace r3rec;

TEST(Config, DefaultsValidate) {
    PipelineConfig c;
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.get("memory.k"), "10");
    EXPECT_EQ(c.get("judge.backend"), "mock");
}

TEST(Config, SetGetRoundTrip) {
    PipelineConfig c;
    for (const auto& key : PipelineConfig::keys()) {
        PipelineConfig d;
        d.set(key, c.get(key));
        EXPECT_EQ(d.get(key), c.get(key)) << key;
    }
    c.set("memory.lambda_mix", "0.3");
    EXPECT_DOUBLE_EQ(c.lambda_mix, 0.3);
    c.set("judge.batched", "false");
    EXPECT_FALSE(c.batched);
    EXPECT_THROW(c.set("memory.nope", "1"), InvalidInput);
    EXPECT_THROW(c.set("memory.k", "ten"), InvalidInput);
}

TEST(Config, ValidationRejectsOutOfRange) {
    const std::pair<const char*, const char*> bad[] = {
        {"memory.lambda_mix", "1.5"}, {"itemsem.budget_min", "9"}, {"protocol.split_train", "0.95"},
        {"judge.calib_t", "0"},       {"intent.kappa", "-1"},      {"polarity.short_months", "24"}};
    for (const auto& [key, value] : bad) {
        PipelineConfig c;
        c.set(key, value);
        EXPECT_THROW(c.validate(), InvalidInput) << key;
    }
}

TEST(Config, IniTextAndComments) {
    PipelineConfig c;
    apply_config_text(c, "# comment\n[memory]\nk = 7 ; trailing\n\n[judge]\nbatched = false\n");
    EXPECT_EQ(c.k, 7u);
    EXPECT_FALSE(c.batched);
    EXPECT_THROW(apply_config_text(c, "k = 3\n"), InvalidInput);
    EXPECT_THROW(apply_config_text(c, "[memory]\nunknown = 3\n"), InvalidInput);

    testutil::TempDir dir("cfg");
    std::ofstream(dir.path() / "a.ini") << "[run]\nseed = 9\n";
    apply_config_file(c, dir.path() / "a.ini");
    EXPECT_EQ(c.seed, 9u);
}

TEST(Config, HashTracksSections) {
    PipelineConfig a, b;
    EXPECT_EQ(a.hash(), b.hash());
    b.set("memory.k", "5");
    EXPECT_NE(a.hash(), b.hash());
    EXPECT_EQ(a.hash({"intent"}), b.hash({"intent"}));
    EXPECT_NE(a.hash({"memory"}), b.hash({"memory"}));
    EXPECT_EQ(a.hash().size(), 16u);
}

TEST(Config, GridExpansionIsCartesian) {
    const auto g = expand_grid("memory.k=5,10; memory.lambda_mix=0,0.5,1");
    ASSERT_EQ(g.size(), 6u);
    EXPECT_EQ(g[0], (std::vector<std::pair<std::string, std::string>>{{"memory.k", "5"}, {"memory.lambda_mix", "0"}}));
    EXPECT_EQ(g[3][0].second, "10");
    EXPECT_EQ(g[5][1].second, "1");
    EXPECT_THROW(expand_grid("memory.k"), InvalidInput);
    EXPECT_THROW(expand_grid("memory.nope=1"), InvalidInput);
}

TEST(Config, AblationSwitches) {
    PipelineConfig c;
    AblationConfig a;
    a.disable_similar_users = true;
    c.set_ablation(a);
    EXPECT_EQ(c.ablation().name(), "disable_similar_users");
    EXPECT_EQ(c.get("ablation.disable_similar_users"), "true");
}
