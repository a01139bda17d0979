// Command-line front end: one subcommand per pipeline stage plus helpers.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "r3rec/common.hpp"
#include "r3rec/config.hpp"
#include "r3rec/pipeline.hpp"
#include "r3rec/synthetic.hpp"

namespace {

struct GlobalOptions {
    std::string config_path;
    std::optional<unsigned long long> seed;
    std::string out;
    bool force = false;
    bool verbose = false;
    std::vector<std::string> sets;
    std::string embedder;
    std::string cache_dir;
    std::string backend;
    std::optional<double> judge_temperature;
    std::optional<double> calib_t;
    bool batched = false;
    bool per_candidate = false;
    bool skip_adapter = false;
    std::optional<std::size_t> budget_min;
    std::optional<std::size_t> budget_max;
    std::optional<double> lambda_cov;
    std::optional<double> alpha;
    std::optional<std::size_t> workers;
};

void add_global_options(CLI::App& app, GlobalOptions& g) {
    app.add_option("--config", g.config_path, "INI configuration file");
    app.add_option("--seed", g.seed, "Root seed");
    app.add_option("--out", g.out, "Output directory");
    app.add_flag("--force", g.force, "Rebuild artifacts even if the configuration changed");
    app.add_flag("-v,--verbose", g.verbose, "Log progress");
    app.add_option("--set", g.sets, "Override a key: section.key=value (repeatable)");
    app.add_option("--embedder", g.embedder, "hashed or remote");
    app.add_option("--cache-dir", g.cache_dir, "Embedding cache directory");
    app.add_option("--backend", g.backend, "Judge backend: mock or live");
    app.add_option("--judge-temperature", g.judge_temperature, "LLM sampling temperature");
    app.add_option("--calib-T", g.calib_t, "Calibration temperature");
    app.add_flag("--batched", g.batched, "Judge all candidates in one slate request");
    app.add_flag("--per-candidate", g.per_candidate, "Judge each candidate in its own request");
    app.add_flag("--skip-adapter", g.skip_adapter, "Use identity fusion blocks instead of training");
    app.add_option("--budget-min", g.budget_min, "Minimum keyphrases per item");
    app.add_option("--budget-max", g.budget_max, "Maximum keyphrases per item");
    app.add_option("--lambda-cov", g.lambda_cov, "Coverage weight of the keyphrase objective");
    app.add_option("--alpha", g.alpha, "tf-idf share of keyphrase relevance");
    app.add_option("--workers", g.workers, "Worker threads");
}

r3rec::PipelineConfig resolve_config(const GlobalOptions& g) {
    r3rec::PipelineConfig c;
    if (!g.config_path.empty()) r3rec::apply_config_file(c, g.config_path);
    if (g.seed) c.seed = *g.seed;
    if (!g.out.empty()) c.out = g.out;
    if (!g.embedder.empty()) c.embedder = g.embedder;
    if (!g.cache_dir.empty()) c.cache_dir = g.cache_dir;
    if (!g.backend.empty()) c.backend = g.backend;
    if (g.judge_temperature) c.judge_temperature = *g.judge_temperature;
    if (g.calib_t) c.calib_t = *g.calib_t;
    if (g.batched) c.batched = true;
    if (g.per_candidate) c.batched = false;
    if (g.skip_adapter) c.skip_adapter = true;
    if (g.budget_min) c.budget_min = *g.budget_min;
    if (g.budget_max) c.budget_max = *g.budget_max;
    if (g.lambda_cov) c.lambda_cov = *g.lambda_cov;
    if (g.alpha) c.alpha = *g.alpha;
    if (g.workers) c.workers = *g.workers;
    for (const auto& kv : g.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw r3rec::InvalidInput("--set expects key=value: " + kv);
        c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    c.validate();
    return c;
}

void print(const r3rec::StageReport& r) { std::cout << r.message << "\n"; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"r3rec: reasoning, retrieval and recommendation over interaction logs"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalOptions g;
    add_global_options(app, g);

    const std::vector<std::pair<std::string, r3rec::Stage>> stages = {
        {"ingest", r3rec::Stage::kIngest},          {"distill-items", r3rec::Stage::kDistill},
        {"build-profiles", r3rec::Stage::kProfiles}, {"train-adapter", r3rec::Stage::kAdapter},
        {"build-memory", r3rec::Stage::kMemory},     {"sweep", r3rec::Stage::kSweep}};
    std::map<CLI::App*, r3rec::Stage> stage_commands;
    for (const auto& [name, stage] : stages) {
        stage_commands[app.add_subcommand(name, "Run the " + name + " stage")] = stage;
    }

    std::string ablation;
    auto* evaluate = app.add_subcommand("evaluate", "Rank the test instances and write a metric report");
    evaluate->add_option("--ablation", ablation, "full, or switches joined by '+' (e.g. disable_similar_users)");

    auto* run = app.add_subcommand("run", "Run ingest through evaluate");
    run->add_option("--ablation", ablation, "Ablation for the evaluate stage");

    std::string query_user;
    std::size_t query_k = 10;
    auto* query = app.add_subcommand("query-memory", "Show a user's nearest neighbors from the memory index");
    query->add_option("--user", query_user, "User id")->required();
    query->add_option("--k", query_k, "Number of neighbors");

    std::string synth_dir = "synthetic-data";
    r3rec::SyntheticConfig synth_config;
    auto* synth = app.add_subcommand("synth", "Generate the synthetic corpus with planted preferences");
    synth->add_option("--dir", synth_dir, "Output directory");
    synth->add_option("--users", synth_config.users);
    synth->add_option("--items", synth_config.items);
    synth->add_option("--data-seed", synth_config.seed, "Seed of the generator");

    CLI11_PARSE(app, argc, argv);
    r3rec::set_log_level(g.verbose ? r3rec::LogLevel::kInfo : r3rec::LogLevel::kWarn);

    try {
        if (synth->parsed()) {
            const auto files = r3rec::generate_synthetic(synth_config, synth_dir);
            std::cout << "wrote " << files.events << " events to " << files.interactions.string() << "\n"
                      << "items: " << files.items.string() << "\nconfig: " << files.config.string() << "\n";
            return 0;
        }
        auto config = resolve_config(g);
        if (!ablation.empty()) config.set_ablation(r3rec::AblationConfig::parse(ablation));
        r3rec::PipelineRunner runner(config);

        for (const auto& [cmd, stage] : stage_commands) {
            if (cmd->parsed()) {
                print(runner.run(stage, g.force));
                return 0;
            }
        }
        if (evaluate->parsed()) {
            print(runner.run(r3rec::Stage::kEvaluate, g.force));
            std::cout << r3rec::read_file(runner.eval_dir() / "report.txt");
            return 0;
        }
        if (run->parsed()) {
            for (const auto& r : runner.run_all(g.force)) print(r);
            std::cout << r3rec::read_file(runner.eval_dir() / "report.txt");
            return 0;
        }
        if (query->parsed()) {
            const auto memory = runner.load_memory();
            auto rc = r3rec::retrieval_config(config);
            rc.k = query_k;
            const auto result = memory.retrieve(query_user, rc);
            for (const auto& n : result.ranked) {
                std::printf("%s\tsim=%.6f\tbm25=%.6f\tcos=%.6f\t%s\n", n.user_id.c_str(), n.sim, n.bm25, n.cosine,
                            memory.find(n.user_id)->text.c_str());
            }
            std::cout << "mmr:";
            for (const auto& id : result.mmr_order) std::cout << " " << id;
            std::cout << "\n";
            return 0;
        }
    } catch (const r3rec::DependencyError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const r3rec::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
