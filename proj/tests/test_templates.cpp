#include <gtest/gtest.h>

#include <fstream>

#include "helpers.hpp"
#include "r3rec/common.hpp"
#include "r3rec/templates.hpp"

using namespace r3rec;

TEST(Templates, BuiltinsPresent) {
    const auto t = TemplateRegistry::builtin();
    for (auto id : {kJudgeTemplate, kSlateTemplate, kTagsTemplate}) {
        ASSERT_TRUE(t.contains(id));
        EXPECT_EQ(t.get(id).rfind("### task: ", 0), 0u);
        EXPECT_EQ(t.hash(id).size(), 16u);
    }
    EXPECT_THROW(t.get("nope"), InvalidInput);
}

TEST(Templates, Render) {
    EXPECT_EQ(render_template("a {{x}} b {{y}}{{x}}", {{"x", "1"}, {"y", "2"}}), "a 1 b 21");
    EXPECT_EQ(render_template("no placeholders", {}), "no placeholders");
    EXPECT_THROW(render_template("{{missing}}", {}), InvalidInput);
    EXPECT_THROW(render_template("open {{x", {{"x", "1"}}), InvalidInput);
}

TEST(Templates, DirectoryOverridesBuiltin) {
    testutil::TempDir dir("tmpl");
    std::ofstream(dir.path() / "judge_v1.txt") << "### task: judge\ncustom {{candidate}}";
    auto t = TemplateRegistry::builtin();
    const auto before = t.hash(kJudgeTemplate);
    t.load_directory(dir.path());
    EXPECT_NE(t.hash(kJudgeTemplate), before);
    EXPECT_NE(t.get(kJudgeTemplate).find("custom"), std::string::npos);
}
