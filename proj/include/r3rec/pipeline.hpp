#pragma once
/// @file pipeline.hpp
/// @brief Stage functions wiring the modules together, plus the on-disk
/// stage runner with its manifest.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "r3rec/config.hpp"
#include "r3rec/corpus.hpp"
#include "r3rec/embedding.hpp"
#include "r3rec/eval.hpp"
#include "r3rec/intent.hpp"
#include "r3rec/itemsem.hpp"
#include "r3rec/llm.hpp"
#include "r3rec/memory.hpp"
#include "r3rec/polarity.hpp"
#include "r3rec/reasoner.hpp"
#include "r3rec/templates.hpp"

namespace r3rec {

/// Seeds for each stage, derived from the root seed by label.
struct StageSeeds {
    std::uint64_t pools = 0;
    std::uint64_t tagger = 0;
    std::uint64_t adapter = 0;
    std::uint64_t memory = 0;
    std::uint64_t judge = 0;

    static StageSeeds derive(std::uint64_t root);
};

struct Providers {
    std::shared_ptr<const EmbeddingProvider> embedder;
    std::shared_ptr<const LlmClient> judge;
    TemplateRegistry templates;
};

Providers make_providers(const PipelineConfig& config);

/// Tagger used by distillation; the mock variant ranks tokens by corpus idf.
std::shared_ptr<const LlmClient> make_tagger(const PipelineConfig& config, const CorpusStats& stats);

// ---------------------------------------------------------------------------
// In-memory stage outputs

struct IngestData {
    Catalog catalog;
    std::vector<InteractionEvent> events;
    SessionSplit split;
    std::vector<EvalInstance> test_instances;
    std::vector<EvalInstance> valid_instances;
    Json split_manifest;
    std::size_t skipped_lines = 0;
    std::size_t skipped_short_sessions = 0;
};

/// Events of training-split sessions, per user, time-ordered.
using Timelines = std::map<std::string, std::vector<InteractionEvent>>;

Timelines training_timelines(const SessionSplit& split);

struct CardSet {
    std::vector<ItemCard> cards;
    std::vector<std::string> warnings;

    const ItemCard* find(const std::string& item_id) const;
    ItemKeywords keywords() const { return card_keywords(cards); }
};

struct UserProfile {
    IntentProfile intent;
    PolarityState polarity;
};

using ProfileSet = std::vector<UserProfile>;  // ordered by user_id

struct AdapterOutcome {
    FusionAdapter adapter;
    std::vector<double> loss_trace;
    std::vector<std::string> warnings;
    std::vector<std::pair<std::string, Embedding>> fused;  // (user_id, h_u)
};

IngestData run_ingest(const PipelineConfig& config);
CardSet run_distill(const PipelineConfig& config, const Catalog& catalog, const Providers& providers);
/// Stand-in cards (item-semantics ablation): raw title tokens.
CardSet title_cards(const Catalog& catalog, const EmbeddingProvider& embedder);

IntentConfig intent_config(const PipelineConfig& config);
PolarityConfig polarity_config(const PipelineConfig& config);
RetrievalConfig retrieval_config(const PipelineConfig& config);
JudgeOptions judge_options(const PipelineConfig& config);

ProfileSet run_build_profiles(const PipelineConfig& config, const Timelines& timelines, const Catalog& catalog,
                              const CardSet& cards, const Providers& providers);
AdapterOutcome run_train_adapter(const PipelineConfig& config, const ProfileSet& profiles);
MemoryIndex run_build_memory(const PipelineConfig& config, const ProfileSet& profiles, const Timelines& timelines,
                             const CardSet& cards, const Providers& providers);

struct EvalInputs {
    const Catalog* catalog = nullptr;
    const std::vector<EvalInstance>* instances = nullptr;
    const CardSet* cards = nullptr;
    const ProfileSet* profiles = nullptr;
    const Timelines* timelines = nullptr;
    const MemoryIndex* memory = nullptr;
};

struct EvalOutput {
    MetricReport report;
    std::vector<InstanceOutcome> outcomes;
    std::vector<Json> trace;  // one row per instance
    double seconds = 0.0;
};

/// Ranks every instance under the configured ablation. Instance failures
/// are recorded; in strict mode the first one is rethrown.
EvalOutput run_evaluation(const PipelineConfig& config, const EvalInputs& inputs, const Providers& providers);

struct SweepRow {
    std::vector<std::pair<std::string, std::string>> overrides;
    std::string config_hash;
    MetricReport report;
};

/// Runs every grid point in memory. With `cache` on, stage outputs are
/// shared between points whose stage hashes agree.
std::vector<SweepRow> run_sweep(const PipelineConfig& base, bool cache);
std::string sweep_csv(const std::vector<SweepRow>& rows);

// ---------------------------------------------------------------------------
// Stage runner

enum class Stage { kIngest, kDistill, kProfiles, kAdapter, kMemory, kEvaluate, kSweep };

std::string stage_name(Stage stage);
Stage stage_from_name(const std::string& name);

/// Hash of the configuration sections a stage reads.
std::string stage_config_hash(const PipelineConfig& config, Stage stage);

struct StageReport {
    Stage stage = Stage::kIngest;
    bool skipped = false;
    std::string message;
    double seconds = 0.0;
};

/// Runs stages against an output directory holding one file per artifact
/// and manifest.json. A stage whose recorded config hash and output hashes
/// still match is skipped; a stage whose config changed is refused unless
/// forced.
class PipelineRunner {
public:
    explicit PipelineRunner(PipelineConfig config);

    StageReport run(Stage stage, bool force = false);
    /// ingest through evaluate.
    std::vector<StageReport> run_all(bool force = false);

    const PipelineConfig& config() const { return config_; }
    std::filesystem::path out_dir() const { return config_.out; }
    /// Directory holding the evaluation outputs for the configured ablation.
    std::filesystem::path eval_dir() const;

    /// Loads the memory index written by build-memory.
    MemoryIndex load_memory() const;

private:
    Json load_manifest() const;
    void save_manifest(const Json& manifest) const;
    void require(Stage stage, const Json& manifest) const;
    std::string manifest_key(Stage stage) const;
    std::vector<std::filesystem::path> outputs(Stage stage) const;
    std::vector<std::filesystem::path> inputs(Stage stage) const;

    void do_ingest();
    void do_distill();
    void do_profiles();
    void do_adapter();
    void do_memory();
    void do_evaluate(double& eval_seconds);
    void do_sweep();

    IngestData load_ingest() const;
    CardSet load_cards() const;
    ProfileSet load_profiles() const;

    PipelineConfig config_;
    std::optional<Providers> providers_;
    const Providers& providers();
};

}  // namespace r3rec
