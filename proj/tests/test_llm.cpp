#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include <httplib.h>

#include "r3rec/common.hpp"
#include "r3rec/embedding.hpp"
#include "r3rec/http.hpp"
#include "r3rec/llm.hpp"
#include "r3rec/reasoner.hpp"
#include "r3rec/templates.hpp"
#include "r3rec/text.hpp"

using namespace r3rec;

namespace {

// Local HTTP server on an ephemeral port, stopped on destruction.
class LocalServer {
public:
    LocalServer() {
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LocalServer() {
        server_.stop();
        thread_.join();
    }
    httplib::Server& server() { return server_; }
    std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

std::string judge_prompt(double cov_plus, double cov_minus) {
    UserEvidence u;
    u.user_id = "1";
    CandidateEvidence c{"9", {"drift"}, cov_plus, cov_minus};
    return assemble_prompt(u, c, TemplateRegistry::builtin());
}

}  // namespace

TEST(MockLlm, DeterministicPerSeedAndPrompt) {
    const MockLlmClient a(5), b(5), c(6);
    ChatRequest r;
    r.prompt = judge_prompt(0.7, 0.1);
    const auto x = a.complete(r), y = b.complete(r), z = c.complete(r);
    EXPECT_EQ(x.text, y.text);
    ASSERT_FALSE(x.tokens.empty());
    EXPECT_EQ(x.tokens[0].logprob, y.tokens[0].logprob);
    EXPECT_NE(x.tokens[0].top[0].logprob, z.tokens[0].top[0].logprob);
    EXPECT_EQ(x.prompt_tokens, estimate_tokens(r.prompt));
}

TEST(MockLlm, StrengthFollowsEvidence) {
    EXPECT_GT(MockLlmClient::match_strength(0.9, 0.0, 1.0), MockLlmClient::match_strength(0.2, 0.6, 0.0));
    const MockLlmClient m(1);
    ChatRequest r;
    r.prompt = judge_prompt(0.95, 0.0);
    EXPECT_EQ(parse_verdict_text(m.complete(r).text).label, VerdictLabel::kStrong);
    r.prompt = judge_prompt(0.0, 0.9);
    EXPECT_EQ(parse_verdict_text(m.complete(r).text).label, VerdictLabel::kNoMatch);
}

TEST(MockLlm, CompletionTokensCappedAtMaxTokens) {
    const MockLlmClient m(1);
    ChatRequest r;
    r.prompt = judge_prompt(0.5, 0.1);
    r.max_tokens = 3;
    EXPECT_LE(m.complete(r).completion_tokens, 3u);
    r.logprobs = false;
    EXPECT_TRUE(m.complete(r).tokens.empty());
    r.prompt = "something else";
    EXPECT_EQ(m.complete(r).text, "unsupported request");
}

TEST(Http, RetriesServerErrorsThenSucceeds) {
    LocalServer s;
    std::atomic<int> hits{0};
    s.server().Post("/x", [&](const httplib::Request&, httplib::Response& res) {
        if (++hits < 3) {
            res.status = 503;
            return;
        }
        res.set_content(R"({"ok": true})", "application/json");
    });
    const auto reply = post_json(s.url("/x"), Json::object(), {}, 5.0, {3, 1});
    EXPECT_TRUE(reply.at("ok").get<bool>());
    EXPECT_EQ(hits.load(), 3);
}

TEST(Http, ExhaustionAndClientErrors) {
    LocalServer s;
    std::atomic<int> hits{0};
    s.server().Post("/busy", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 429;
    });
    s.server().Post("/bad", [](const httplib::Request&, httplib::Response& res) { res.status = 400; });
    EXPECT_THROW(post_json(s.url("/busy"), Json::object(), {}, 5.0, {2, 1}), RetryExhausted);
    EXPECT_EQ(hits.load(), 2);
    EXPECT_THROW(post_json(s.url("/bad"), Json::object(), {}, 5.0, {3, 1}), Error);
}

TEST(Http, LiveClientParsesChatCompletion) {
    LocalServer s;
    std::string seen_auth;
    s.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        const auto body = Json::parse(req.body);
        EXPECT_EQ(body.at("max_tokens").get<int>(), 20);
        Json reply = {{"choices",
                       {{{"message", {{"content", "STRONG - fits"}}},
                         {"logprobs",
                          {{"content",
                            {{{"token", "STR"},
                              {"logprob", -0.1},
                              {"top_logprobs", {{{"token", "STR"}, {"logprob", -0.1}}, {{"token", "NO"}, {"logprob", -2.4}}}}}}}}}}}},
                      {"usage", {{"prompt_tokens", 812}, {"completion_tokens", 4}}}};
        res.set_content(reply.dump(), "application/json");
    });
    LiveLlmConfig cfg;
    cfg.url = s.url("/v1/chat/completions");
    cfg.api_key = "k";
    const LiveLlmClient client(cfg);
    ChatRequest r;
    r.prompt = "hi";
    const auto c = client.complete(r);
    EXPECT_EQ(seen_auth, "Bearer k");
    EXPECT_EQ(c.text, "STRONG - fits");
    EXPECT_EQ(c.prompt_tokens, 812u);
    ASSERT_EQ(c.tokens.size(), 1u);
    EXPECT_EQ(c.tokens[0].top.size(), 2u);
}

TEST(Http, RemoteEmbedderBatches) {
    LocalServer s;
    std::atomic<int> calls{0};
    s.server().Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
        ++calls;
        Json out = {{"embeddings", Json::array()}};
        const auto body = Json::parse(req.body);
        for (const auto& t : body.at("input")) {
            out["embeddings"].push_back({static_cast<double>(t.get<std::string>().size()), 1.0});
        }
        res.set_content(out.dump(), "application/json");
    });
    RemoteEmbeddingConfig cfg;
    cfg.url = s.url("/embed");
    cfg.batch_size = 2;
    cfg.max_in_flight = 1;
    const RemoteEmbeddingProvider p(cfg);
    const auto v = p.embed_batch({"a", "bb", "ccc"});
    ASSERT_EQ(v.size(), 3u);
    EXPECT_EQ(v[2][0], 3.0);
    EXPECT_EQ(p.dimension(), 2u);
    EXPECT_EQ(calls.load(), 2);
}
