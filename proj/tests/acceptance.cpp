// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. The end-to-end checks drive the r3rec CLI in separate
// processes so reruns and restarts start from a cold process.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "r3rec/common.hpp"
#include "r3rec/corpus.hpp"
#include "r3rec/eval.hpp"
#include "r3rec/intent.hpp"
#include "r3rec/io.hpp"
#include "r3rec/itemsem.hpp"
#include "r3rec/memory.hpp"
#include "r3rec/polarity.hpp"
#include "r3rec/reasoner.hpp"
#include "r3rec/text.hpp"

#ifndef R3REC_CLI_PATH
#error "R3REC_CLI_PATH must name the r3rec executable"
#endif

using namespace r3rec;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void check(bool ok, const std::string& what) {
        if (!ok && pass) detail = what;
        pass = pass && ok;
    }
};

std::string fmt(double v, int digits = 4) { return format_fixed(v, digits); }

std::string sci(double v) {
    std::ostringstream s;
    s << std::scientific << std::setprecision(2) << v;
    return s.str();
}

// --- 1: intent softmax -----------------------------------------------------

Outcome intent_suite() {
    Outcome o;
    Rng rng(101);
    const double kappas[] = {0.5, 1.0, 2.0, 4.0};
    double worst_sum = 0.0;
    for (int t = 0; t < 1000; ++t) {
        EvidenceMap e;
        const std::size_t n = 1 + rng.uniform_index(12);
        for (std::size_t i = 0; i < n; ++i) e["c" + std::to_string(i)] = {5.0 * rng.uniform01(), 5.0 * rng.uniform01()};
        double prev_entropy = std::numeric_limits<double>::infinity();
        for (double kappa : kappas) {
            const auto w = intent_weights(e, kappa);
            std::vector<double> p;
            double sum = 0.0;
            for (const auto& [k, v] : w) {
                p.push_back(v);
                sum += v;
            }
            worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
            const double h = oracle::entropy(p);
            o.check(h <= prev_entropy + 1e-12, "entropy increased with kappa on map " + std::to_string(t));
            prev_entropy = h;
        }
    }
    o.check(worst_sum <= 1e-9, "weights sum off by " + sci(worst_sum));
    const auto w = intent_weights({{"k1", {1.0, 0.0}}, {"k2", {0.0, 0.0}}}, 1.0);
    o.check(std::abs(w.at("k1") - 0.73106) <= 1e-4 && std::abs(w.at("k2") - 0.26894) <= 1e-4,
            "two-category example gave " + fmt(w.at("k1"), 5) + ", " + fmt(w.at("k2"), 5));
    if (o.pass) {
        o.detail = "max |sum-1| " + sci(worst_sum) + ", example (" + fmt(w.at("k1"), 5) + ", " +
                   fmt(w.at("k2"), 5) + ")";
    }
    return o;
}

// --- 2: facility location --------------------------------------------------

Outcome facility_suite() {
    Outcome o;
    Rng rng(202);
    const double lambdas[] = {0.0, 0.5, 2.0};
    const double bound = 1.0 - 1.0 / std::exp(1.0);
    int within = 0;
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 1 + rng.uniform_index(10);
        const std::size_t budget = 1 + rng.uniform_index(4);
        const double lambda = lambdas[t % 3];
        oracle::FacilityOracle fo;
        fo.lambda = lambda;
        std::vector<Embedding> emb;
        std::vector<std::string> texts;
        for (std::size_t i = 0; i < n; ++i) {
            fo.psi.push_back(rng.uniform01());
            emb.push_back(testutil::to_embedding(testutil::random_vec(rng, 4)));
            texts.push_back("p" + std::to_string(i));
        }
        fo.sim.assign(n, std::vector<double>(n));
        for (std::size_t q = 0; q < n; ++q) {
            for (std::size_t c = 0; c < n; ++c) fo.sim[q][c] = oracle::cosine(emb[q].values(), emb[c].values());
        }
        const FacilityLocation f(fo.psi, emb, lambda);
        const auto g = greedy_select(f, texts, {std::min(budget, n), budget, lambda, 0.0});
        if (fo.value(g.selected) + 1e-12 >= bound * fo.exhaustive_best(budget)) ++within;
    }
    o.check(within == 200, "greedy under the bound on " + std::to_string(200 - within) + " pools");

    int diminishing = 0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 2 + rng.uniform_index(9);
        std::vector<double> psi;
        std::vector<Embedding> emb;
        for (std::size_t i = 0; i < n; ++i) {
            psi.push_back(rng.uniform01());
            emb.push_back(testutil::to_embedding(testutil::random_vec(rng, 4)));
        }
        const FacilityLocation f(psi, emb, 2.0 * rng.uniform01());
        const std::size_t c = rng.uniform_index(n);
        std::vector<std::size_t> s, big;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == c) continue;
            const double u = rng.uniform01();
            if (u < 0.3) s.push_back(i);
            if (u < 0.7) big.push_back(i);
        }
        if (f.gain(c, s) + 1e-12 >= f.gain(c, big)) ++diminishing;
    }
    o.check(diminishing == 1000, "marginal gain grew on " + std::to_string(1000 - diminishing) + " triples");
    if (o.pass) o.detail = "200/200 pools within (1-1/e), 1000/1000 triples with diminishing gain";
    return o;
}

// --- 3: BM25 and hybrid retrieval ------------------------------------------

UserSketch sketch_of(const std::string& id, const std::vector<std::string>& tokens, Embedding dense) {
    UserSketch s;
    s.user_id = id;
    s.text = "likes: " + join_tokens(tokens, ", ");
    for (const auto& t : tokens) ++s.sparse[t];
    s.dense = std::move(dense);
    return s;
}

Outcome bm25_suite() {
    Outcome o;
    const std::vector<std::vector<std::string>> docs = {{"space", "robots", "space"},
                                                        {"farm", "crops"},
                                                        {"space", "farm"},
                                                        {"robots", "battle", "arena", "robots"},
                                                        {"puzzle"}};
    MemoryIndex toy;
    for (std::size_t i = 0; i < docs.size(); ++i) toy.add(sketch_of("d" + std::to_string(i), docs[i], Embedding({1.0, 0.0})));
    toy.freeze();
    const double expected[] = {1.918929444024712, 0.0, 0.9395274254529659, 1.0137006432518842, 0.0};
    double worst = 0.0;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        worst = std::max(worst, std::abs(toy.bm25({{"space", 1}, {"robots", 1}}, d) - expected[d]));
    }
    o.check(worst <= 1e-9, "toy BM25 off by " + sci(worst));
    o.check(hybrid_similarity(3.0, 4.0, 0.2, 0.0) == 0.2 && hybrid_similarity(3.0, 4.0, 0.2, 1.0) == 0.75,
            "degenerate mixes are not exact");

    Rng rng(303);
    MemoryIndex idx;
    const std::size_t users = 200;
    for (std::size_t u = 0; u < users; ++u) {
        std::vector<std::string> doc;
        const std::size_t len = 1 + rng.uniform_index(12);
        for (std::size_t i = 0; i < len; ++i) {
            const double r = rng.uniform01();
            doc.push_back("t" + std::to_string(static_cast<std::size_t>(r * r * 60.0)));
        }
        idx.add(sketch_of("u" + std::to_string(1000 + u), doc, testutil::to_embedding(testutil::random_vec(rng, 8))));
    }
    idx.freeze();
    RetrievalConfig cfg;
    std::size_t agree = 0;
    for (std::size_t u = 0; u < users; ++u) {
        const auto& q = idx.entries()[u];
        std::vector<double> bm(users);
        double z = 0.0;
        for (std::size_t d = 0; d < users; ++d) {
            bm[d] = idx.bm25(q.sparse, d);
            if (d != u) z = std::max(z, bm[d]);
        }
        z = std::max(z, 1e-12);
        std::vector<std::pair<double, std::string>> all;
        for (std::size_t d = 0; d < users; ++d) {
            if (d == u || bm[d] / z < cfg.bm25_cutoff) continue;
            const auto& e = idx.entries()[d];
            all.emplace_back(hybrid_similarity(bm[d], z, cosine(q.dense, e.dense), cfg.lambda_mix), e.user_id);
        }
        std::sort(all.begin(), all.end(),
                  [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
        if (all.size() > cfg.k) all.resize(cfg.k);
        const auto r = idx.retrieve(q.user_id, cfg);
        bool same = r.ranked.size() == all.size();
        for (std::size_t i = 0; same && i < all.size(); ++i) {
            same = r.ranked[i].user_id == all[i].second && r.ranked[i].sim == all[i].first;
        }
        agree += same;
    }
    o.check(agree == users, "pruned top-K differs for " + std::to_string(users - agree) + " users");
    if (o.pass) o.detail = "toy max error " + sci(worst) + ", pruned == exhaustive for 200/200 users";
    return o;
}

// --- 4: MMR ----------------------------------------------------------------

Outcome mmr_suite() {
    Outcome o;
    Rng rng(404);
    int cases = 0, agree = 0;
    for (double lambda : {0.0, 0.5, 1.0}) {
        for (int t = 0; t < 500; ++t) {
            const std::size_t n = 1 + rng.uniform_index(5);
            std::vector<double> sims;
            std::vector<oracle::Vec> vecs;
            std::vector<Embedding> emb;
            std::vector<std::string> ids;
            for (std::size_t i = 0; i < n; ++i) {
                sims.push_back(rng.uniform01());
                vecs.push_back(testutil::random_vec(rng, 3));
                emb.push_back(testutil::to_embedding(vecs.back()));
                ids.push_back("v" + std::to_string(i));
            }
            const std::size_t m = 1 + rng.uniform_index(5);
            ++cases;
            agree += mmr_order(sims, emb, ids, lambda, m) == oracle::mmr(sims, vecs, ids, lambda, m);
        }
    }
    o.check(agree == cases, "MMR differs from brute force on " + std::to_string(cases - agree) + " cases");
    if (o.pass) o.detail = std::to_string(agree) + "/" + std::to_string(cases) + " cases match brute force";
    return o;
}

// --- 5: adapter gradients --------------------------------------------------

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

Outcome adapter_suite() {
    Outcome o;
    Rng rng(505);
    const double h = 1e-5;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto samples = random_samples(rng, 6, 8);
        const FusionAdapter a = FusionAdapter::random(8, 4, 5000 + trial);
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
            worst = std::max(worst, (numeric - *grads[b]).norm() / std::max(1e-12, numeric.norm()));
        }
    }
    o.check(worst < 1e-4, "gradient relative error " + sci(worst));

    AdapterTrainConfig cfg;
    cfg.fused_dim = 4;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 200;
    cfg.seed = 9;
    const auto r = train_adapter(random_samples(rng, 40, 8), 8, cfg);
    bool monotone = true;
    for (std::size_t i = 1; i < r.loss_trace.size(); ++i) monotone = monotone && r.loss_trace[i] <= r.loss_trace[i - 1];
    o.check(monotone, "loss trace increased");
    if (o.pass) {
        o.detail = "max relative error " + sci(worst) + ", loss " + fmt(r.loss_trace.front(), 5) + " -> " +
                   fmt(r.loss_trace.back(), 5) + " over 200 epochs";
    }
    return o;
}

// --- 6: coverage features --------------------------------------------------

Outcome coverage_suite() {
    Outcome o;
    Rng rng(606);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        auto draw = [&](std::size_t n) {
            std::vector<oracle::Vec> v;
            for (std::size_t i = 0; i < n; ++i) v.push_back(testutil::random_vec(rng, 6));
            return v;
        };
        const auto plus = draw(1 + rng.uniform_index(5)), minus = draw(1 + rng.uniform_index(5));
        const auto items = draw(1 + rng.uniform_index(8));
        auto emb = [](const std::vector<oracle::Vec>& v) {
            std::vector<Embedding> e;
            for (const auto& x : v) e.push_back(Embedding(x));
            return e;
        };
        const auto cov = coverage_features(emb(plus), emb(minus), emb(items));
        worst = std::max({worst, std::abs(cov.plus - oracle::max_pair_cosine(plus, items)),
                          std::abs(cov.minus - oracle::max_pair_cosine(minus, items))});
    }
    o.check(worst <= 1e-12, "coverage differs from the pairwise max by " + sci(worst));
    const std::vector<Embedding> one{Embedding({0.6, 0.8})};
    const auto a = coverage_features({}, {}, one), b = coverage_features(one, one, {});
    o.check(a.plus == 0.0 && a.minus == 0.0 && b.plus == 0.0 && b.minus == 0.0, "empty set did not give 0");
    if (o.pass) o.detail = "100 instances, max error " + sci(worst) + ", empty sets give 0";
    return o;
}

// --- 7: calibration --------------------------------------------------------

VerdictProbs random_simplex(Rng& rng) {
    VerdictProbs p;
    double z = 0.0;
    for (auto& v : p) z += v = -std::log(1.0 - rng.uniform01());
    for (auto& v : p) v /= z;
    return p;
}

Outcome calibration_suite() {
    Outcome o;
    Rng rng(707);
    double identity_err = 0.0, flat_err = 0.0;
    int argmax_ok = 0;
    for (int t = 0; t < 1000; ++t) {
        const auto p = random_simplex(rng);
        const auto c = calibrate(p, 1.0);
        for (int k = 0; k < 3; ++k) identity_err = std::max(identity_err, std::abs(c[k] - p[k]));
        bool same = true;
        for (double temp : {0.5, 1.0, 2.0, 10.0}) same = same && argmax_label(calibrate(p, temp)) == argmax_label(p);
        argmax_ok += same;
        flat_err = std::max(flat_err, std::abs(verdict_score(calibrate(p, 1e6)) - 0.5));
    }
    o.check(identity_err <= 1e-9, "T=1 changed probabilities by " + sci(identity_err));
    o.check(argmax_ok == 1000, "argmax moved on " + std::to_string(1000 - argmax_ok) + " points");
    o.check(flat_err <= 1e-3, "T=1e6 score off 0.5 by " + sci(flat_err));
    if (o.pass) {
        o.detail = "identity error " + sci(identity_err) + ", argmax kept 1000/1000, |score-0.5| " +
                   sci(flat_err);
    }
    return o;
}

// --- 8: evaluation protocol ------------------------------------------------

Outcome protocol_suite() {
    Outcome o;
    std::vector<std::string> pool;
    for (int i = 0; i < 20; ++i) pool.push_back("i" + std::to_string(i));
    for (const auto& g : pool) {
        for (std::size_t k = 1; k < 20; ++k) o.check(hr_at_k(pool, g, k) <= hr_at_k(pool, g, k + 1), "HR@k not monotone");
    }
    Rng rng(808);
    const int trials = 100000;
    double hr5 = 0.0, hr10 = 0.0;
    for (int t = 0; t < trials; ++t) {
        rng.shuffle(pool);
        hr5 += hr_at_k(pool, "i0", 5);
        hr10 += hr_at_k(pool, "i0", 10);
    }
    hr5 /= trials;
    hr10 /= trials;
    o.check(std::abs(hr5 - 0.25) <= 0.01, "random HR@5 " + fmt(hr5));
    o.check(std::abs(hr10 - 0.50) <= 0.01, "random HR@10 " + fmt(hr10));

    Catalog catalog;
    for (int i = 1; i <= 200; ++i) catalog.add({std::to_string(i), "t", {}, "", {}});
    int pools_ok = 0;
    for (int t = 0; t < 500; ++t) {
        Session s{"u", 50, {}};
        const std::size_t len = 2 + rng.uniform_index(5);
        for (std::size_t i = 0; i < len; ++i) {
            s.events.push_back({"u", std::to_string(1 + rng.uniform_index(200)), 5.0,
                                50 * kSecondsPerDay + static_cast<std::int64_t>(i), 1});
        }
        std::vector<InteractionEvent> prior;
        for (int i = 0; i < 40; ++i) prior.push_back({"u", std::to_string(1 + rng.uniform_index(200)), 4.0, 100 + i, 1});
        const auto seed = rng.next_u64();
        const auto a = build_eval_instance(s, prior, {}, catalog, {20, 100}, seed);
        const auto b = build_eval_instance(s, prior, {}, catalog, {20, 100}, seed);
        const bool has_truth = std::find(a.candidates.begin(), a.candidates.end(), a.ground_truth) != a.candidates.end();
        pools_ok += has_truth && a.candidates == b.candidates && a.candidates.size() == 20;
    }
    o.check(pools_ok == 500, "pool invariant broken on " + std::to_string(500 - pools_ok) + " sessions");
    if (o.pass) o.detail = "random HR@5 " + fmt(hr5) + ", HR@10 " + fmt(hr10) + ", 500/500 pools valid and repeatable";
    return o;
}

// --- 9 and 10: end-to-end on the synthetic corpus --------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

bool cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string("\"") + R3REC_CLI_PATH + "\" " + args + " >>\"" + log.string() + "\" 2>&1";
    return std::system(cmd.c_str()) == 0;
}

struct EndToEnd {
    bool ran = false;
    std::string error;
    std::string report_a, report_b, report_staged;
    MetricReport full, no_semantics, no_neighbors;
};

EndToEnd run_end_to_end(const fs::path& work) {
    EndToEnd e;
    const fs::path log = work / "cli.log";
    const fs::path data = work / "data";
    const std::string cfg = "--config \"" + (data / "synthetic.ini").string() + "\" ";
    auto out = [&](const char* name) { return "--out \"" + (work / name).string() + "\" "; };
    if (!cli("synth --dir \"" + data.string() + "\" --users 300 --items 500", log)) {
        e.error = "synth failed, see " + log.string();
        return e;
    }
    if (!cli(cfg + out("run_a") + "run", log) || !cli(cfg + out("run_b") + "run", log)) {
        e.error = "pipeline run failed, see " + log.string();
        return e;
    }
    // One process per stage, each reading its inputs back from disk.
    for (const char* stage : {"ingest", "distill-items", "build-profiles", "train-adapter", "build-memory", "evaluate"}) {
        if (!cli(cfg + out("run_staged") + stage, log)) {
            e.error = std::string("stage ") + stage + " failed, see " + log.string();
            return e;
        }
    }
    for (const char* ablation : {"disable_item_semantics", "disable_similar_users"}) {
        if (!cli(cfg + out("run_a") + "evaluate --ablation " + ablation, log)) {
            e.error = std::string("ablation ") + ablation + " failed, see " + log.string();
            return e;
        }
    }
    e.report_a = slurp(work / "run_a/eval/full/report.json");
    e.report_b = slurp(work / "run_b/eval/full/report.json");
    e.report_staged = slurp(work / "run_staged/eval/full/report.json");
    e.full = MetricReport::from_json(Json::parse(e.report_a));
    e.no_semantics = MetricReport::from_json(Json::parse(slurp(work / "run_a/eval/disable_item_semantics/report.json")));
    e.no_neighbors = MetricReport::from_json(Json::parse(slurp(work / "run_a/eval/disable_similar_users/report.json")));
    e.ran = true;
    return e;
}

Outcome end_to_end_suite(const EndToEnd& e) {
    Outcome o;
    o.check(e.ran, e.error);
    if (!e.ran) return o;
    o.check(!e.report_a.empty() && e.report_a == e.report_b, "reports differ between two full runs");
    o.check(e.report_a == e.report_staged, "report differs when stages run in separate processes");
    o.check(e.full.hr1 > e.no_semantics.hr1, "full HR@1 " + fmt(e.full.hr1) + " <= no item semantics " +
                                                  fmt(e.no_semantics.hr1));
    o.check(e.full.hr1 > e.no_neighbors.hr1, "full HR@1 " + fmt(e.full.hr1) + " <= no similar users " +
                                                  fmt(e.no_neighbors.hr1));
    if (o.pass) {
        o.detail = "byte-identical reports (2 runs + staged restart); HR@1 full " + fmt(e.full.hr1) +
                   " > no similar users " + fmt(e.no_neighbors.hr1) + " > no item semantics " + fmt(e.no_semantics.hr1) +
                   " on " + std::to_string(e.full.n_instances) + " instances";
    }
    return o;
}

Outcome token_suite(const EndToEnd& e) {
    Outcome o;
    o.check(e.ran, e.error);
    if (!e.ran) return o;
    const auto& r = e.full;
    o.check(r.requests > 0, "no judge requests were made");
    o.check(r.mean_input_per_request >= 875.0 && r.mean_input_per_request <= 1625.0,
            "mean input tokens " + fmt(r.mean_input_per_request, 1) + " outside [875, 1625]");
    o.check(r.max_output_request <= 20, "a request produced " + std::to_string(r.max_output_request) + " output tokens");
    const double hand = static_cast<double>(r.input_tokens) / 1000.0 * r.prices.input_per_1k +
                        static_cast<double>(r.output_tokens) / 1000.0 * r.prices.output_per_1k;
    o.check(r.cost == hand, "report cost " + std::to_string(r.cost) + " != hand arithmetic " + std::to_string(hand));
    o.check(account_cost(1000, 1000, {0.0005, 0.0015}) == 1000.0 / 1000.0 * 0.0005 + 1000.0 / 1000.0 * 0.0015,
            "account_cost disagrees on a round example");
    if (o.pass) {
        o.detail = "mean input " + fmt(r.mean_input_per_request, 1) + " tokens/request, max output " +
                   std::to_string(r.max_output_request) + ", cost $" + fmt(r.cost, 6) + " for " +
                   std::to_string(r.requests) + " requests";
    }
    return o;
}

struct Criterion {
    int id;
    const char* name;
    double limit_s;  // 0: no runtime bound
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    testutil::TempDir work("acceptance");
    std::optional<EndToEnd> e2e;
    double e2e_seconds = 0.0;
    auto end_to_end = [&]() -> const EndToEnd& {
        if (!e2e) {
            const auto t0 = std::chrono::steady_clock::now();
            e2e = run_end_to_end(work.path());
            e2e_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
        return *e2e;
    };

    const std::vector<Criterion> criteria = {
        {1, "intent softmax", 5.0, intent_suite},
        {2, "facility location", 60.0, facility_suite},
        {3, "bm25 and hybrid retrieval", 0.0, bm25_suite},
        {4, "mmr reranking", 0.0, mmr_suite},
        {5, "adapter gradients", 0.0, adapter_suite},
        {6, "coverage features", 0.0, coverage_suite},
        {7, "calibration", 0.0, calibration_suite},
        {8, "evaluation protocol", 0.0, protocol_suite},
        {9, "end-to-end determinism and ablations", 300.0, [&] { return end_to_end_suite(end_to_end()); }},
        {10, "token budget and cost", 0.0, [&] { return token_suite(end_to_end()); }},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& ex) {
            o.pass = false;
            o.detail = std::string("exception: ") + ex.what();
        }
        double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.id == 9) seconds = std::max(seconds, e2e_seconds);
        if (c.limit_s > 0.0 && seconds >= c.limit_s) {
            o.pass = false;
            o.detail = "took " + fmt(seconds, 1) + " s, limit " + fmt(c.limit_s, 0) + " s";
        }
        failed += !o.pass;
        std::cout << "criterion " << c.id << " [" << c.name << "]: " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail
                  << " (" << fmt(seconds, 2) << " s)" << std::endl;
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
