#include "r3rec/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <set>

#include "r3rec/common.hpp"
#include "r3rec/parallel.hpp"
#include "r3rec/random.hpp"
#include "r3rec/text.hpp"

namespace r3rec {

namespace fs = std::filesystem;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Keys that change where or how fast a run happens, not what it computes.
PipelineConfig without_run_location(const PipelineConfig& config) {
    PipelineConfig c = config;
    const PipelineConfig defaults;
    c.out = defaults.out;
    c.workers = defaults.workers;
    c.trace = defaults.trace;
    c.cache_dir = defaults.cache_dir;
    c.max_in_flight = defaults.max_in_flight;
    c.sweep_cache = defaults.sweep_cache;
    return c;
}

std::string report_config_hash(const PipelineConfig& config) { return without_run_location(config).hash(); }

}  // namespace

StageSeeds StageSeeds::derive(std::uint64_t root) {
    return {derive_seed(root, "pools"), derive_seed(root, "tagger"), derive_seed(root, "adapter"),
            derive_seed(root, "memory"), derive_seed(root, "judge")};
}

Providers make_providers(const PipelineConfig& config) {
    Providers p;
    std::shared_ptr<const EmbeddingProvider> inner;
    if (config.embedder == "remote") {
        auto rc = RemoteEmbeddingConfig::from_env();
        rc.dimension = config.dimension;
        inner = std::make_shared<RemoteEmbeddingProvider>(rc);
    } else {
        inner = std::make_shared<HashedEmbeddingProvider>(config.dimension);
    }
    if (!config.cache_dir.empty() || config.embedder == "remote") {
        std::optional<fs::path> dir;
        if (!config.cache_dir.empty()) dir = config.cache_dir;
        p.embedder = std::make_shared<CachedEmbeddingProvider>(inner, dir);
    } else {
        p.embedder = inner;
    }
    const auto seeds = StageSeeds::derive(config.seed);
    if (config.backend == "live") {
        p.judge = std::make_shared<LiveLlmClient>(LiveLlmConfig::from_env());
    } else {
        p.judge = std::make_shared<MockLlmClient>(seeds.judge);
    }
    p.templates = TemplateRegistry::builtin();
    if (!config.templates_dir.empty()) p.templates.load_directory(config.templates_dir);
    return p;
}

std::shared_ptr<const LlmClient> make_tagger(const PipelineConfig& config, const CorpusStats& stats) {
    if (config.backend == "live") return std::make_shared<LiveLlmClient>(LiveLlmConfig::from_env());
    return std::make_shared<MockLlmClient>(StageSeeds::derive(config.seed).tagger,
                                           [&stats](const std::string& token) { return stats.idf(token); });
}

// ---------------------------------------------------------------------------

IngestData run_ingest(const PipelineConfig& config) {
    if (config.interactions.empty() || config.items.empty()) {
        throw InvalidInput("ingest needs data.interactions and data.items");
    }
    IngestData d;
    ParseOptions options;
    options.format = config.format == "jsonl"       ? InteractionFormat::kJsonl
                     : config.format == "delimited" ? InteractionFormat::kDelimited
                                                    : InteractionFormat::kAuto;
    options.sign_rule = {config.sign_threshold, config.implicit_feedback};
    options.strict = config.strict;
    auto parsed = parse_interactions(config.interactions, options);
    d.events = std::move(parsed.events);
    d.skipped_lines = parsed.skipped;
    if (parsed.skipped) log_warn("ingest: skipped " + std::to_string(parsed.skipped) + " malformed interaction lines");
    d.catalog = parse_item_metadata(config.items, config.strict);

    const SplitRatios ratios{config.split_train, config.split_valid, config.split_test};
    d.split = split_sessions(sessionize(d.events), ratios);
    const auto timelines = events_by_user(d.events);
    const PoolOptions pools{config.pool_size, config.h_max};
    const auto seeds = StageSeeds::derive(config.seed);
    auto test = build_eval_instances(d.split.test, timelines, d.catalog, pools, derive_seed(seeds.pools, "test"));
    auto valid = build_eval_instances(d.split.valid, timelines, d.catalog, pools, derive_seed(seeds.pools, "valid"));
    d.test_instances = std::move(test.instances);
    d.valid_instances = std::move(valid.instances);
    d.skipped_short_sessions = test.skipped_short + valid.skipped_short;
    d.split_manifest = split_manifest(d.split, ratios, config.seed);
    d.split_manifest["instances"] = {{"test", d.test_instances.size()}, {"valid", d.valid_instances.size()},
                                     {"skipped_short_sessions", d.skipped_short_sessions}};
    d.split_manifest["skipped_lines"] = d.skipped_lines;
    return d;
}

Timelines training_timelines(const SessionSplit& split) {
    Timelines out;
    for (const auto& s : split.train) {
        auto& t = out[s.user_id];
        t.insert(t.end(), s.events.begin(), s.events.end());
    }
    for (auto& [user, events] : out) {
        std::stable_sort(events.begin(), events.end(),
                         [](const InteractionEvent& a, const InteractionEvent& b) { return a.timestamp < b.timestamp; });
    }
    return out;
}

const ItemCard* CardSet::find(const std::string& item_id) const {
    auto it = std::lower_bound(cards.begin(), cards.end(), item_id,
                               [](const ItemCard& c, const std::string& id) { return c.item_id < id; });
    return it != cards.end() && it->item_id == item_id ? &*it : nullptr;
}

namespace {

void sort_cards(std::vector<ItemCard>& cards) {
    std::sort(cards.begin(), cards.end(), [](const ItemCard& a, const ItemCard& b) { return a.item_id < b.item_id; });
}

}  // namespace

CardSet run_distill(const PipelineConfig& config, const Catalog& catalog, const Providers& providers) {
    const CorpusStats stats = CorpusStats::from_catalog(catalog);
    const auto tagger = config.abstractive ? make_tagger(config, stats) : nullptr;
    DistillConfig dc;
    dc.selection = {config.budget_min, config.budget_max, config.lambda_cov, config.eps_gain};
    dc.chunk = {config.tau_pmi, config.max_phrase_tokens};
    dc.alpha = config.alpha;

    const auto& items = catalog.items();
    CardSet out;
    out.cards.resize(items.size());
    std::vector<std::vector<std::string>> warnings(items.size());
    parallel_for(items.size(), config.workers, [&](std::size_t i) {
        out.cards[i] = distill_item(items[i], stats, *providers.embedder, tagger.get(), providers.templates, dc,
                                    &warnings[i]);
    });
    for (auto& w : warnings) out.warnings.insert(out.warnings.end(), w.begin(), w.end());
    sort_cards(out.cards);
    return out;
}

CardSet title_cards(const Catalog& catalog, const EmbeddingProvider& embedder) {
    CardSet out;
    for (const auto& item : catalog.items()) out.cards.push_back(title_token_card(item, embedder));
    sort_cards(out.cards);
    return out;
}

IntentConfig intent_config(const PipelineConfig& c) {
    IntentConfig ic;
    ic.kappa = c.kappa;
    ic.half_life_days = c.half_life_days;
    ic.n_intent = c.n_intent;
    ic.window_months = c.window_months;
    ic.h_max = c.h_max;
    return ic;
}

PolarityConfig polarity_config(const PipelineConfig& c) {
    PolarityConfig pc;
    pc.horizons = {c.short_months, c.long_months};
    pc.half_life_days = c.half_life_days;
    pc.n_keywords = c.n_keywords;
    return pc;
}

RetrievalConfig retrieval_config(const PipelineConfig& c) {
    return {c.k, c.lambda_mix, c.bm25_cutoff, c.lambda_mmr, c.m_out};
}

JudgeOptions judge_options(const PipelineConfig& c) {
    JudgeOptions o;
    o.llm_temperature = c.judge_temperature;
    o.max_tokens = c.max_tokens;
    o.calibration_temperature = c.calib_t;
    o.batched = c.batched;
    o.max_in_flight = c.max_in_flight;
    return o;
}

namespace {

std::span<const InteractionEvent> truncated(const std::vector<InteractionEvent>& events, std::size_t h_max) {
    std::span<const InteractionEvent> s(events);
    return s.size() > h_max ? s.subspan(s.size() - h_max) : s;
}

UserProfile build_user_profile(const PipelineConfig& config, const std::string& user,
                               std::span<const InteractionEvent> history, const Catalog& catalog,
                               const ItemKeywords& keywords, const KeywordIdf& idf, const EmbeddingProvider& embedder) {
    UserProfile p;
    p.intent = build_intent_profile(user, history, catalog, embedder, intent_config(config),
                                    config.disable_multilevel_intent);
    p.polarity = config.disable_polarity
                     ? empty_polarity_state(user, embedder.dimension())
                     : build_polarity_state(user, history, keywords, idf, embedder, polarity_config(config));
    return p;
}

}  // namespace

ProfileSet run_build_profiles(const PipelineConfig& config, const Timelines& timelines, const Catalog& catalog,
                              const CardSet& cards, const Providers& providers) {
    const auto keywords = cards.keywords();
    const KeywordIdf idf(keywords, catalog.size());
    std::vector<const std::pair<const std::string, std::vector<InteractionEvent>>*> users;
    for (const auto& entry : timelines) users.push_back(&entry);
    ProfileSet out(users.size());
    parallel_for(users.size(), config.workers, [&](std::size_t i) {
        const auto& [user, events] = *users[i];
        out[i] = build_user_profile(config, user, truncated(events, config.h_max), catalog, keywords, idf,
                                    *providers.embedder);
    });
    return out;
}

AdapterOutcome run_train_adapter(const PipelineConfig& config, const ProfileSet& profiles) {
    std::vector<AlignmentSample> samples;
    samples.reserve(profiles.size());
    for (const auto& p : profiles) {
        samples.push_back(make_alignment_sample(p.intent.intent_vector, p.polarity.short_term.vectors.polarity,
                                                p.polarity.long_term.vectors.polarity));
    }
    AdapterTrainConfig tc;
    tc.learning_rate = config.adapter_lr;
    tc.epochs = config.skip_adapter ? 0 : config.adapter_epochs;
    tc.seed = StageSeeds::derive(config.seed).adapter;
    tc.fused_dim = config.fused_dim;
    tc.identity_init = config.skip_adapter;
    auto trained = train_adapter(samples, config.dimension, tc);

    AdapterOutcome out;
    out.adapter = std::move(trained.adapter);
    out.loss_trace = std::move(trained.loss_trace);
    out.warnings = std::move(trained.warnings);
    for (const auto& p : profiles) {
        out.fused.emplace_back(p.intent.user_id, fuse(p.intent.intent_vector, p.polarity.short_term.vectors.polarity,
                                                      p.polarity.long_term.vectors.polarity, out.adapter));
    }
    return out;
}

MemoryIndex run_build_memory(const PipelineConfig& config, const ProfileSet& profiles, const Timelines& timelines,
                             const CardSet& cards, const Providers& providers) {
    const auto keywords = cards.keywords();
    const SketchConfig sc{config.sketch_keyphrases};
    std::vector<UserSketch> sketches(profiles.size());
    parallel_for(profiles.size(), config.workers, [&](std::size_t i) {
        const auto& user = profiles[i].intent.user_id;
        auto it = timelines.find(user);
        const std::span<const InteractionEvent> history =
            it == timelines.end() ? std::span<const InteractionEvent>() : truncated(it->second, config.h_max);
        sketches[i] = build_sketch(user, profiles[i].intent, history, keywords, *providers.embedder, sc);
    });
    MemoryIndex index(Bm25Params{config.bm25_k1, config.bm25_b});
    for (auto& s : sketches) index.add(std::move(s));
    index.freeze();
    return index;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

struct EvalContext {
    const PipelineConfig* config;
    const Catalog* catalog;
    const CardSet* cards;
    ItemKeywords keywords;
    KeywordIdf idf;
    const MemoryIndex* memory;  // null when similar users are disabled
    const Providers* providers;
    JudgeOptions judge;
    RetrievalConfig retrieval;
};

std::vector<Embedding> embed_names(const RankedWeights& ranked, const EmbeddingProvider& embedder) {
    std::vector<Embedding> out;
    for (const auto& [w, v] : ranked) out.push_back(embedder.embed(w));
    return out;
}

InstanceOutcome evaluate_instance(const EvalInstance& inst, const EvalContext& ctx, Json* trace) {
    const auto& config = *ctx.config;
    const auto& embedder = *ctx.providers->embedder;
    InstanceOutcome outcome;
    outcome.user_id = inst.user_id;
    outcome.day_key = inst.day_key;
    outcome.ground_truth = inst.ground_truth;

    const std::span<const InteractionEvent> history(inst.history);
    const UserProfile profile =
        build_user_profile(config, inst.user_id, history, *ctx.catalog, ctx.keywords, ctx.idf, embedder);

    UserEvidence user;
    user.user_id = inst.user_id;
    user.top_intents = profile.intent.top_intents;
    user.short_liked = top_keywords(profile.polarity.short_term.weights.positive, config.n_keywords);
    user.short_disliked = top_keywords(profile.polarity.short_term.weights.negative, config.n_keywords);
    user.long_liked = top_keywords(profile.polarity.long_term.weights.positive, config.n_keywords);
    user.long_disliked = top_keywords(profile.polarity.long_term.weights.negative, config.n_keywords);

    if (ctx.memory) {
        const auto sketch = build_sketch(inst.user_id, profile.intent, history, ctx.keywords, embedder,
                                         SketchConfig{config.sketch_keyphrases});
        const auto result = ctx.memory->retrieve_for(sketch, ctx.retrieval);
        for (const auto& id : result.mmr_order) user.neighbors.push_back({id, ctx.memory->find(id)->text});
    }

    const auto liked = embed_names(profile.polarity.top_positive, embedder);
    const auto disliked = embed_names(profile.polarity.top_negative, embedder);
    std::vector<CandidateEvidence> candidates;
    for (const auto& item_id : inst.candidates) {
        const ItemCard* card = ctx.cards->find(item_id);
        ItemCard fallback;
        if (!card) {
            const ItemMeta* meta = ctx.catalog->find(item_id);
            if (!meta) throw InvalidInput("candidate " + item_id + " is not in the catalog");
            log_warn("item " + item_id + " has no card; using title tokens");
            fallback = title_token_card(*meta, embedder);
            card = &fallback;
        }
        std::vector<Embedding> phrases;
        for (const auto& k : card->keyphrases) phrases.push_back(k.embedding);
        const auto cov = coverage_features(liked, disliked, phrases);
        candidates.push_back({item_id, card->texts(), cov.plus, cov.minus});
    }

    const auto ranking =
        rank_candidates(user, candidates, *ctx.providers->judge, ctx.providers->templates, ctx.judge);
    std::vector<std::string> order;
    for (const auto& r : ranking.ranked) order.push_back(r.item_id);
    outcome.rank = rank_of(order, inst.ground_truth);
    outcome.input_tokens = ranking.usage.input;
    outcome.output_tokens = ranking.usage.output;
    outcome.requests = ranking.usage.requests;
    outcome.max_output_request = ranking.usage.max_output_request;

    if (trace) {
        Json ranked = Json::array();
        for (const auto& r : ranking.ranked) {
            ranked.push_back({{"item_id", r.item_id},
                              {"score", r.score},
                              {"label", verdict_label_name(r.label)},
                              {"cov_plus", r.cov_plus},
                              {"cov_minus", r.cov_minus},
                              {"rationale", r.rationale}});
        }
        Json neighbors = Json::array();
        for (const auto& n : user.neighbors) neighbors.push_back(n.user_id);
        *trace = {{"user_id", inst.user_id},
                  {"day_key", inst.day_key},
                  {"ground_truth", inst.ground_truth},
                  {"rank", outcome.rank},
                  {"neighbors", neighbors},
                  {"ranking", ranked},
                  {"prompts", ranking.prompts}};
    }
    return outcome;
}

}  // namespace

EvalOutput run_evaluation(const PipelineConfig& config, const EvalInputs& in, const Providers& providers) {
    if (!in.catalog || !in.instances || !in.cards) throw InvalidInput("evaluation inputs incomplete");
    const auto start = std::chrono::steady_clock::now();
    const auto ablation = config.ablation();

    // Ablation stand-ins replace module outputs before anything reads them.
    CardSet stand_in_cards;
    const CardSet* cards = in.cards;
    if (ablation.disable_item_semantics) {
        stand_in_cards = title_cards(*in.catalog, *providers.embedder);
        cards = &stand_in_cards;
    }
    MemoryIndex rebuilt;
    const MemoryIndex* memory = nullptr;
    if (!ablation.disable_similar_users) {
        if (ablation.disable_item_semantics || ablation.disable_multilevel_intent || !in.memory) {
            if (!in.timelines) throw InvalidInput("evaluation needs training timelines to rebuild the memory");
            PipelineConfig memory_config = config;
            memory_config.disable_polarity = true;  // sketches read intents only
            const auto profiles = run_build_profiles(memory_config, *in.timelines, *in.catalog, *cards, providers);
            rebuilt = run_build_memory(config, profiles, *in.timelines, *cards, providers);
            memory = &rebuilt;
        } else {
            memory = in.memory;
        }
    }

    EvalContext ctx{&config,  in.catalog, cards, cards->keywords(), KeywordIdf(cards->keywords(), in.catalog->size()),
                    memory,   &providers, judge_options(config), retrieval_config(config)};

    std::vector<EvalInstance> instances = *in.instances;
    if (config.max_instances > 0 && instances.size() > config.max_instances) instances.resize(config.max_instances);

    EvalOutput out;
    out.outcomes.resize(instances.size());
    out.trace.resize(config.trace ? instances.size() : 0);
    parallel_for(instances.size(), config.workers, [&](std::size_t i) {
        try {
            out.outcomes[i] = evaluate_instance(instances[i], ctx, config.trace ? &out.trace[i] : nullptr);
        } catch (const RetryExhausted&) {
            throw;
        } catch (const Error& e) {
            if (config.strict) throw;
            auto& o = out.outcomes[i];
            o.user_id = instances[i].user_id;
            o.day_key = instances[i].day_key;
            o.ground_truth = instances[i].ground_truth;
            o.failed = true;
            o.error = e.what();
            if (config.trace) out.trace[i] = {{"user_id", o.user_id}, {"day_key", o.day_key}, {"error", o.error}};
        }
    });
    out.report = aggregate_outcomes(out.outcomes, config.prices());
    out.report.config_hash = report_config_hash(config);
    out.report.seed = config.seed;
    out.report.ablation = ablation.name();
    out.report.backend = std::string(backend_kind_name(providers.judge->kind()));
    out.report.template_hash = providers.templates.hash(config.batched ? kSlateTemplate : kJudgeTemplate);
    out.seconds = seconds_since(start);
    return out;
}

// ---------------------------------------------------------------------------
// Sweep

namespace {

const std::vector<std::string>& stage_sections(Stage stage) {
    static const std::map<Stage, std::vector<std::string>> sections = {
        {Stage::kIngest, {"data", "protocol", "run.seed"}},
        {Stage::kDistill, {"itemsem", "embedding", "judge.backend", "judge.templates_dir", "run.seed"}},
        {Stage::kProfiles, {"intent", "polarity.short_months", "polarity.long_months", "polarity.n_keywords", "embedding"}},
        {Stage::kAdapter, {"polarity", "embedding.dimension", "run.seed"}},
        {Stage::kMemory, {"memory", "intent", "embedding", "run.seed"}},
        {Stage::kEvaluate, {}},
        {Stage::kSweep, {}},
    };
    return sections.at(stage);
}

}  // namespace

std::string stage_config_hash(const PipelineConfig& config, Stage stage) {
    const PipelineConfig c = without_run_location(config);
    // Each stage also covers everything upstream of it.
    std::string chain;
    for (Stage s : {Stage::kIngest, Stage::kDistill, Stage::kProfiles, Stage::kAdapter, Stage::kMemory}) {
        chain += c.hash(stage_sections(s));
        if (s == stage) return hex64(fnv1a64(chain));
    }
    return c.hash();
}

std::vector<SweepRow> run_sweep(const PipelineConfig& base, bool cache) {
    const auto points = expand_grid(base.sweep_grid);
    std::map<std::string, std::shared_ptr<IngestData>> ingest_cache;
    std::map<std::string, std::shared_ptr<Providers>> provider_cache;
    std::map<std::string, std::shared_ptr<CardSet>> card_cache;
    std::map<std::string, std::shared_ptr<ProfileSet>> profile_cache;
    std::map<std::string, std::shared_ptr<MemoryIndex>> memory_cache;

    auto cached = [cache](auto& table, const std::string& key, auto make) {
        if (cache) {
            auto it = table.find(key);
            if (it != table.end()) return it->second;
        }
        auto value = make();
        if (cache) table[key] = value;
        return value;
    };

    std::vector<SweepRow> rows;
    for (const auto& overrides : points) {
        PipelineConfig c = base;
        for (const auto& [k, v] : overrides) c.set(k, v);
        c.validate();
        const auto provider_key = c.hash({"embedding", "judge", "run.seed"});
        auto providers = cached(provider_cache, provider_key, [&] { return std::make_shared<Providers>(make_providers(c)); });
        auto ingest = cached(ingest_cache, stage_config_hash(c, Stage::kIngest),
                             [&] { return std::make_shared<IngestData>(run_ingest(c)); });
        auto cards = cached(card_cache, stage_config_hash(c, Stage::kDistill),
                            [&] { return std::make_shared<CardSet>(run_distill(c, ingest->catalog, *providers)); });
        const auto timelines = training_timelines(ingest->split);
        PipelineConfig canonical = c;
        canonical.set_ablation({});
        auto profiles = cached(profile_cache, stage_config_hash(c, Stage::kProfiles), [&] {
            return std::make_shared<ProfileSet>(
                run_build_profiles(canonical, timelines, ingest->catalog, *cards, *providers));
        });
        auto memory = cached(memory_cache, stage_config_hash(c, Stage::kMemory), [&] {
            return std::make_shared<MemoryIndex>(run_build_memory(canonical, *profiles, timelines, *cards, *providers));
        });
        EvalInputs in{&ingest->catalog, &ingest->test_instances, cards.get(), profiles.get(), &timelines, memory.get()};
        PipelineConfig eval_config = c;
        eval_config.trace = false;
        auto result = run_evaluation(eval_config, in, *providers);
        rows.push_back({overrides, result.report.config_hash, std::move(result.report)});
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out;
    if (rows.empty()) return out;
    for (const auto& [k, v] : rows.front().overrides) out += k + ",";
    out += "config_hash,hr@1,hr@5,hr@10,ndcg@5,n_instances,input_tokens,output_tokens,cost_usd\n";
    for (const auto& row : rows) {
        for (const auto& [k, v] : row.overrides) out += v + ",";
        const auto& r = row.report;
        out += row.config_hash + "," + format_fixed(r.hr1, 6) + "," + format_fixed(r.hr5, 6) + "," +
               format_fixed(r.hr10, 6) + "," + format_fixed(r.ndcg5, 6) + "," + std::to_string(r.n_instances) + "," +
               std::to_string(r.input_tokens) + "," + std::to_string(r.output_tokens) + "," +
               format_fixed(r.cost, 8) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stage runner

std::string stage_name(Stage stage) {
    switch (stage) {
        case Stage::kIngest: return "ingest";
        case Stage::kDistill: return "distill-items";
        case Stage::kProfiles: return "build-profiles";
        case Stage::kAdapter: return "train-adapter";
        case Stage::kMemory: return "build-memory";
        case Stage::kEvaluate: return "evaluate";
        case Stage::kSweep: return "sweep";
    }
    return "ingest";
}

Stage stage_from_name(const std::string& name) {
    for (Stage s : {Stage::kIngest, Stage::kDistill, Stage::kProfiles, Stage::kAdapter, Stage::kMemory,
                    Stage::kEvaluate, Stage::kSweep}) {
        if (stage_name(s) == name) return s;
    }
    throw InvalidInput("unknown stage: " + name);
}

namespace {

constexpr Stage kChain[] = {Stage::kIngest, Stage::kDistill, Stage::kProfiles, Stage::kAdapter, Stage::kMemory,
                            Stage::kEvaluate};

std::vector<Stage> prerequisites(Stage stage) {
    std::vector<Stage> out;
    if (stage == Stage::kSweep) return out;
    for (Stage s : kChain) {
        if (s == stage) break;
        out.push_back(s);
    }
    return out;
}

}  // namespace

PipelineRunner::PipelineRunner(PipelineConfig config) : config_(std::move(config)) { config_.validate(); }

const Providers& PipelineRunner::providers() {
    if (!providers_) providers_ = make_providers(config_);
    return *providers_;
}

fs::path PipelineRunner::eval_dir() const { return out_dir() / "eval" / config_.ablation().name(); }

std::string PipelineRunner::manifest_key(Stage stage) const {
    if (stage == Stage::kEvaluate) return "evaluate:" + config_.ablation().name();
    return stage_name(stage);
}

std::vector<fs::path> PipelineRunner::outputs(Stage stage) const {
    const fs::path o = out_dir();
    switch (stage) {
        case Stage::kIngest:
            return {o / "interactions.jsonl", o / "catalog.jsonl", o / "sessions.jsonl", o / "instances_test.jsonl",
                    o / "instances_valid.jsonl", o / "split_manifest.json"};
        case Stage::kDistill: return {o / "item_cards.jsonl"};
        case Stage::kProfiles: return {o / "profiles.jsonl"};
        case Stage::kAdapter: return {o / "adapter.json", o / "fused_states.jsonl"};
        case Stage::kMemory: return {o / "memory"};
        case Stage::kEvaluate: return {eval_dir() / "report.json", eval_dir() / "report.txt"};
        case Stage::kSweep: return {o / "sweep" / "sweep.csv", o / "sweep" / "reports.jsonl"};
    }
    return {};
}

std::vector<fs::path> PipelineRunner::inputs(Stage stage) const {
    switch (stage) {
        case Stage::kIngest: return {config_.interactions, config_.items};
        case Stage::kSweep: return {config_.interactions, config_.items};
        default: break;
    }
    std::vector<fs::path> in;
    for (Stage s : prerequisites(stage)) {
        const auto o = outputs(s);
        in.insert(in.end(), o.begin(), o.end());
    }
    return in;
}

Json PipelineRunner::load_manifest() const {
    const auto path = out_dir() / "manifest.json";
    if (!fs::exists(path)) return {{"format", "r3rec.manifest"}, {"version", 1}, {"stages", Json::object()},
                                   {"history", Json::array()}};
    return Json::parse(read_file(path));
}

void PipelineRunner::save_manifest(const Json& manifest) const {
    write_file_atomic(out_dir() / "manifest.json", manifest.dump(2) + "\n");
}

void PipelineRunner::require(Stage stage, const Json& manifest) const {
    for (Stage s : prerequisites(stage)) {
        const auto key = stage_name(s);
        bool ok = manifest["stages"].contains(key);
        for (const auto& p : outputs(s)) ok = ok && fs::exists(p);
        if (!ok) {
            throw DependencyError("stage '" + stage_name(stage) + "' requires '" + key + "' to run first");
        }
    }
}

namespace {

Json hash_files(const std::vector<fs::path>& files, const fs::path& base) {
    Json out = Json::object();
    for (const auto& f : files) {
        const auto rel = f.is_absolute() && f.string().rfind(base.string(), 0) != 0 ? f.string()
                                                                                    : fs::relative(f, base).generic_string();
        out[rel] = file_hash(f);
    }
    return out;
}

}  // namespace

StageReport PipelineRunner::run(Stage stage, bool force) {
    fs::create_directories(out_dir());
    Json manifest = load_manifest();
    require(stage, manifest);
    const auto key = manifest_key(stage);
    const auto stage_hash = stage_config_hash(config_, stage);
    const Json input_hashes = hash_files(inputs(stage), out_dir());

    StageReport report;
    report.stage = stage;
    if (manifest["stages"].contains(key)) {
        const Json& entry = manifest["stages"][key];
        const bool outputs_intact = entry.value("outputs", Json::object()) == hash_files(outputs(stage), out_dir());
        const bool same_config = entry.value("stage_hash", "") == stage_hash;
        const bool same_inputs = entry.value("inputs", Json::object()) == input_hashes;
        if (!force && outputs_intact && same_config && same_inputs) {
            report.skipped = true;
            report.message = stage_name(stage) + ": up-to-date";
            return report;
        }
        if (!force && !same_config) {
            throw InvalidInput(stage_name(stage) + ": existing artifacts were built from a different configuration "
                               "(stage hash " + entry.value("stage_hash", "") + ", now " + stage_hash +
                               "); rerun with --force to replace them");
        }
    }

    const auto start = std::chrono::steady_clock::now();
    double eval_seconds = 0.0;
    switch (stage) {
        case Stage::kIngest: do_ingest(); break;
        case Stage::kDistill: do_distill(); break;
        case Stage::kProfiles: do_profiles(); break;
        case Stage::kAdapter: do_adapter(); break;
        case Stage::kMemory: do_memory(); break;
        case Stage::kEvaluate: do_evaluate(eval_seconds); break;
        case Stage::kSweep: do_sweep(); break;
    }
    report.seconds = seconds_since(start);

    manifest["stages"][key] = {{"stage", stage_name(stage)},
                               {"stage_hash", stage_hash},
                               {"config_hash", report_config_hash(config_)},
                               {"seed", config_.seed},
                               {"inputs", input_hashes},
                               {"outputs", hash_files(outputs(stage), out_dir())},
                               {"seconds", report.seconds}};
    manifest["history"].push_back({{"stage", key}, {"stage_hash", stage_hash}, {"forced", force}});
    save_manifest(manifest);

    if (stage == Stage::kEvaluate) {
        // Wall-clock timings live apart from the report so reports stay
        // byte-identical across runs.
        Json timings = Json::object();
        for (auto& [k, v] : manifest["stages"].items()) timings[k] = v.value("seconds", 0.0);
        timings["evaluation_loop"] = eval_seconds;
        write_file_atomic(eval_dir() / "timings.json", timings.dump(2) + "\n");
    }
    report.message = stage_name(stage) + ": done in " + format_fixed(report.seconds, 2) + " s";
    return report;
}

std::vector<StageReport> PipelineRunner::run_all(bool force) {
    std::vector<StageReport> out;
    for (Stage s : kChain) out.push_back(run(s, force));
    return out;
}

// ---------------------------------------------------------------------------
// Stage bodies

namespace {

PipelineConfig canonical_stage_config(const PipelineConfig& c) {
    PipelineConfig out = c;
    out.set_ablation({});
    return out;
}

std::vector<Json> instance_rows(const std::vector<EvalInstance>& instances) {
    std::vector<Json> rows;
    for (const auto& i : instances) rows.push_back(instance_to_json(i));
    return rows;
}

std::vector<EvalInstance> load_instances(const fs::path& path) {
    std::vector<EvalInstance> out;
    for (const auto& row : read_jsonl(path)) out.push_back(instance_from_json(row));
    return out;
}

}  // namespace

void PipelineRunner::do_ingest() {
    const auto d = run_ingest(config_);
    const fs::path o = out_dir();
    std::vector<Json> events, items, sessions;
    for (const auto& e : d.events) events.push_back(event_to_json(e));
    for (const auto& item : d.catalog.items()) items.push_back(item_to_json(item));
    const std::pair<const char*, const std::vector<Session>*> parts[] = {
        {"train", &d.split.train}, {"valid", &d.split.valid}, {"test", &d.split.test}};
    for (const auto& [part, list] : parts) {
        for (const auto& s : *list) {
            Json ev = Json::array();
            for (const auto& e : s.events) ev.push_back(event_to_json(e));
            sessions.push_back({{"part", part}, {"user_id", s.user_id}, {"day_key", s.day_key}, {"events", ev}});
        }
    }
    write_jsonl_atomic(o / "interactions.jsonl", events);
    write_jsonl_atomic(o / "catalog.jsonl", items);
    write_jsonl_atomic(o / "sessions.jsonl", sessions);
    write_jsonl_atomic(o / "instances_test.jsonl", instance_rows(d.test_instances));
    write_jsonl_atomic(o / "instances_valid.jsonl", instance_rows(d.valid_instances));
    write_file_atomic(o / "split_manifest.json", d.split_manifest.dump(2) + "\n");
    log_info("ingest: " + std::to_string(d.events.size()) + " events, " + std::to_string(d.catalog.size()) +
             " items, " + std::to_string(d.test_instances.size()) + " test instances");
}

IngestData PipelineRunner::load_ingest() const {
    const fs::path o = out_dir();
    IngestData d;
    d.catalog = parse_item_metadata(o / "catalog.jsonl", true);
    for (const auto& row : read_jsonl(o / "interactions.jsonl")) d.events.push_back(event_from_json(row));
    for (const auto& row : read_jsonl(o / "sessions.jsonl")) {
        Session s;
        s.user_id = row.at("user_id").get<std::string>();
        s.day_key = row.at("day_key").get<std::int64_t>();
        for (const auto& e : row.at("events")) s.events.push_back(event_from_json(e));
        const auto part = row.at("part").get<std::string>();
        (part == "train" ? d.split.train : part == "valid" ? d.split.valid : d.split.test).push_back(std::move(s));
    }
    d.test_instances = load_instances(o / "instances_test.jsonl");
    d.valid_instances = load_instances(o / "instances_valid.jsonl");
    d.split_manifest = Json::parse(read_file(o / "split_manifest.json"));
    return d;
}

void PipelineRunner::do_distill() {
    const auto d = load_ingest();
    const auto cards = run_distill(canonical_stage_config(config_), d.catalog, providers());
    std::vector<Json> rows;
    for (const auto& c : cards.cards) rows.push_back(card_to_json(c));
    write_jsonl_atomic(out_dir() / "item_cards.jsonl", rows);
    for (const auto& w : cards.warnings) log_warn(w);
}

CardSet PipelineRunner::load_cards() const {
    CardSet out;
    for (const auto& row : read_jsonl(out_dir() / "item_cards.jsonl")) {
        out.cards.push_back(card_from_json(row, *providers_->embedder));
    }
    sort_cards(out.cards);
    return out;
}

void PipelineRunner::do_profiles() {
    const auto d = load_ingest();
    providers();
    const auto cards = load_cards();
    const auto profiles =
        run_build_profiles(canonical_stage_config(config_), training_timelines(d.split), d.catalog, cards, providers());
    std::vector<Json> rows;
    for (const auto& p : profiles) {
        rows.push_back({{"intent", intent_profile_to_json(p.intent)}, {"polarity", polarity_state_to_json(p.polarity)}});
    }
    write_jsonl_atomic(out_dir() / "profiles.jsonl", rows);
}

ProfileSet PipelineRunner::load_profiles() const {
    ProfileSet out;
    for (const auto& row : read_jsonl(out_dir() / "profiles.jsonl")) {
        out.push_back({intent_profile_from_json(row.at("intent")), polarity_state_from_json(row.at("polarity"))});
    }
    return out;
}

void PipelineRunner::do_adapter() {
    const auto profiles = load_profiles();
    const auto outcome = run_train_adapter(config_, profiles);
    Json doc = outcome.adapter.to_json(stage_config_hash(config_, Stage::kAdapter));
    doc["loss_trace"] = outcome.loss_trace;
    doc["warnings"] = outcome.warnings;
    write_file_atomic(out_dir() / "adapter.json", doc.dump() + "\n");
    std::vector<Json> rows;
    for (const auto& [user, h] : outcome.fused) rows.push_back({{"user_id", user}, {"h", h.values()}});
    write_jsonl_atomic(out_dir() / "fused_states.jsonl", rows);
}

void PipelineRunner::do_memory() {
    const auto d = load_ingest();
    providers();
    const auto cards = load_cards();
    const auto profiles = load_profiles();
    const auto index = run_build_memory(config_, profiles, training_timelines(d.split), cards, providers());
    index.save(out_dir() / "memory", StageSeeds::derive(config_.seed).memory, *providers().embedder);
}

MemoryIndex PipelineRunner::load_memory() const { return MemoryIndex::load(out_dir() / "memory"); }

void PipelineRunner::do_evaluate(double& eval_seconds) {
    const auto d = load_ingest();
    providers();
    const auto cards = load_cards();
    const auto profiles = load_profiles();
    const auto timelines = training_timelines(d.split);
    const auto memory = load_memory();
    EvalInputs in{&d.catalog, &d.test_instances, &cards, &profiles, &timelines, &memory};
    const auto result = run_evaluation(config_, in, providers());
    eval_seconds = result.seconds;
    const auto dir = eval_dir();
    write_file_atomic(dir / "report.json", result.report.to_json().dump(2) + "\n");
    write_file_atomic(dir / "report.txt", result.report.to_table());
    if (config_.trace) write_jsonl_atomic(dir / "trace.jsonl", result.trace);
    const auto full_report = out_dir() / "eval" / "full" / "report.json";
    if (config_.ablation().any() && fs::exists(full_report)) {
        const auto base = MetricReport::from_json(Json::parse(read_file(full_report)));
        write_file_atomic(dir / "comparison.json", compare_reports(base, result.report).dump(2) + "\n");
    }
    if (result.report.n_failed) {
        log_warn("evaluate: " + std::to_string(result.report.n_failed) + " instances failed");
    }
}

void PipelineRunner::do_sweep() {
    const auto rows = run_sweep(config_, config_.sweep_cache);
    std::vector<Json> reports;
    for (const auto& r : rows) {
        Json overrides = Json::object();
        for (const auto& [k, v] : r.overrides) overrides[k] = v;
        reports.push_back({{"overrides", overrides}, {"report", r.report.to_json()}});
    }
    write_file_atomic(out_dir() / "sweep" / "sweep.csv", sweep_csv(rows));
    write_jsonl_atomic(out_dir() / "sweep" / "reports.jsonl", reports);
}

}  // namespace r3rec
