#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "r3rec/common.hpp"
#include "r3rec/pipeline.hpp"
#include "r3rec/synthetic.hpp"

using namespace r3rec;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Small synthetic corpus shared by the tests in this file.
class PipelineTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        data_ = new testutil::TempDir("pipeline-data");
        SyntheticConfig s;
        s.users = 40;
        s.items = 120;
        files_ = generate_synthetic(s, data_->path());
    }
    static void TearDownTestSuite() {
        delete data_;
        data_ = nullptr;
    }

    PipelineConfig config(const std::filesystem::path& out) const {
        PipelineConfig c;
        apply_config_file(c, files_.config);
        c.out = out.string();
        c.dimension = 64;
        c.fused_dim = 16;
        c.adapter_epochs = 20;
        c.workers = 2;
        return c;
    }

    static testutil::TempDir* data_;
    static SyntheticFiles files_;
};

testutil::TempDir* PipelineTest::data_ = nullptr;
SyntheticFiles PipelineTest::files_;

}  // namespace

TEST(StageNames, RoundTrip) {
    for (auto s : {Stage::kIngest, Stage::kDistill, Stage::kProfiles, Stage::kAdapter, Stage::kMemory, Stage::kEvaluate,
                   Stage::kSweep}) {
        EXPECT_EQ(stage_from_name(stage_name(s)), s);
    }
    EXPECT_THROW(stage_from_name("bogus"), InvalidInput);
}

TEST(StageHashes, OnlyReadSectionsMatter) {
    PipelineConfig a, b;
    b.set("memory.k", "5");
    EXPECT_EQ(stage_config_hash(a, Stage::kIngest), stage_config_hash(b, Stage::kIngest));
    EXPECT_EQ(stage_config_hash(a, Stage::kDistill), stage_config_hash(b, Stage::kDistill));
    EXPECT_NE(stage_config_hash(a, Stage::kMemory), stage_config_hash(b, Stage::kMemory));
    b = a;
    b.set("run.out", "elsewhere");
    b.set("run.workers", "9");
    EXPECT_EQ(stage_config_hash(a, Stage::kEvaluate), stage_config_hash(b, Stage::kEvaluate));
}

TEST_F(PipelineTest, DependencyOrderEnforced) {
    testutil::TempDir out("pipeline-out");
    PipelineRunner r(config(out.path()));
    EXPECT_THROW(r.run(Stage::kDistill), DependencyError);
    r.run(Stage::kIngest);
    EXPECT_THROW(r.run(Stage::kMemory), DependencyError);
}

TEST_F(PipelineTest, SkipsUpToDateAndRefusesChangedConfig) {
    testutil::TempDir out("pipeline-out");
    {
        PipelineRunner r(config(out.path()));
        for (const auto& rep : r.run_all()) EXPECT_FALSE(rep.skipped);
        EXPECT_TRUE(std::filesystem::exists(r.eval_dir() / "report.json"));
        EXPECT_TRUE(std::filesystem::exists(r.eval_dir() / "trace.jsonl"));
        EXPECT_TRUE(std::filesystem::exists(out.path() / "manifest.json"));
    }
    PipelineRunner again(config(out.path()));
    for (const auto& rep : again.run_all()) EXPECT_TRUE(rep.skipped) << stage_name(rep.stage);

    auto changed = config(out.path());
    changed.set("memory.k", "5");
    PipelineRunner r2(changed);
    EXPECT_TRUE(r2.run(Stage::kDistill).skipped);
    EXPECT_THROW(r2.run(Stage::kMemory), InvalidInput);
    EXPECT_FALSE(r2.run(Stage::kMemory, true).skipped);
}

TEST_F(PipelineTest, DeletedOutputIsRebuilt) {
    testutil::TempDir out("pipeline-out");
    PipelineRunner r(config(out.path()));
    r.run(Stage::kIngest);
    r.run(Stage::kDistill);
    const auto cards = slurp(out.path() / "item_cards.jsonl");
    std::filesystem::remove(out.path() / "item_cards.jsonl");
    EXPECT_FALSE(r.run(Stage::kDistill).skipped);
    EXPECT_EQ(slurp(out.path() / "item_cards.jsonl"), cards);
}

TEST_F(PipelineTest, RerunIsByteIdentical) {
    testutil::TempDir a("pipeline-a"), b("pipeline-b");
    PipelineRunner(config(a.path())).run_all();
    PipelineRunner(config(b.path())).run_all();
    EXPECT_EQ(slurp(a.path() / "eval/full/report.json"), slurp(b.path() / "eval/full/report.json"));
    EXPECT_EQ(slurp(a.path() / "eval/full/trace.jsonl"), slurp(b.path() / "eval/full/trace.jsonl"));
    EXPECT_EQ(slurp(a.path() / "item_cards.jsonl"), slurp(b.path() / "item_cards.jsonl"));
}

TEST_F(PipelineTest, AblationWritesComparison) {
    testutil::TempDir out("pipeline-out");
    PipelineRunner(config(out.path())).run_all();
    auto c = config(out.path());
    AblationConfig a;
    a.disable_similar_users = true;
    c.set_ablation(a);
    PipelineRunner r(c);
    r.run(Stage::kEvaluate);
    EXPECT_EQ(r.eval_dir().filename(), "disable_similar_users");
    const auto cmp = Json::parse(slurp(r.eval_dir() / "comparison.json"));
    EXPECT_TRUE(cmp.contains("metrics"));
}

TEST_F(PipelineTest, SweepWithAndWithoutCacheAgree) {
    auto c = config(data_->path() / "unused");
    c.max_instances = 10;
    c.sweep_grid = "memory.k=3,10";
    const auto cached = run_sweep(c, true);
    const auto fresh = run_sweep(c, false);
    ASSERT_EQ(cached.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(cached[i].report.to_json(), fresh[i].report.to_json());
    EXPECT_NE(sweep_csv(cached).find("memory.k"), std::string::npos);
}
