#pragma once
/// @file corpus.hpp
/// @brief Interaction log / item metadata ingestion, day-level sessionization,
/// chronological splits, and per-session candidate pools.

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "r3rec/io.hpp"

namespace r3rec {

inline constexpr std::int64_t kSecondsPerDay = 86400;

/// One timestamped (user, item, feedback) record.
struct InteractionEvent {
    std::string user_id;
    std::string item_id;
    double rating = 0.0;
    std::int64_t timestamp = 0;  // seconds since epoch, > 0
    int sign = 1;                // +1 liked, -1 disliked

    friend bool operator==(const InteractionEvent&, const InteractionEvent&) = default;
};

/// All of one user's events on one UTC calendar day, time-ordered.
struct Session {
    std::string user_id;
    std::int64_t day_key = 0;  // floor(timestamp / 86400)
    std::vector<InteractionEvent> events;

    std::int64_t start() const { return events.front().timestamp; }
    std::int64_t end() const { return events.back().timestamp; }
};

struct ItemMeta {
    std::string item_id;
    std::string title;
    std::vector<std::string> categories;
    std::string description;
    std::map<std::string, std::string> extra_attributes;
};

/// Item metadata keyed by id; insertion order is preserved for deterministic
/// iteration.
class Catalog {
public:
    /// Throws InvalidInput on a duplicate item_id.
    void add(ItemMeta item);

    const ItemMeta* find(std::string_view item_id) const;
    bool contains(std::string_view item_id) const { return find(item_id) != nullptr; }
    const std::vector<ItemMeta>& items() const { return items_; }
    std::size_t size() const { return items_.size(); }

private:
    std::vector<ItemMeta> items_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Maps a rating to a feedback sign. Explicit scales: rating >= threshold is
/// positive. Implicit datasets: every event is positive.
struct SignRule {
    double positive_threshold = 4.0;
    bool implicit = false;

    int sign(double rating) const {
        if (implicit) return 1;
        return rating >= positive_threshold ? 1 : -1;
    }
};

enum class InteractionFormat { kAuto, kDelimited, kJsonl };

struct ParseOptions {
    InteractionFormat format = InteractionFormat::kAuto;
    SignRule sign_rule;
    bool strict = false;
};

struct ParseResult {
    std::vector<InteractionEvent> events;
    std::size_t skipped = 0;
    std::vector<std::string> skipped_examples;  // first few offending lines
};

/// Parses a delimited ('::', tab, or comma, optionally with a header) or
/// JSON-lines interaction log. Malformed lines are skipped and counted, or
/// raise ParseError in strict mode.
ParseResult parse_interactions(const std::filesystem::path& path, const ParseOptions& options = {});

/// Same as parse_interactions() over in-memory text. kAuto means delimited.
ParseResult parse_interactions_text(std::string_view text, const ParseOptions& options = {});

/// JSON-lines item metadata: item_id, title, categories[], description; any
/// other string/number fields land in extra_attributes.
Catalog parse_item_metadata(const std::filesystem::path& path, bool strict = false);
Catalog parse_item_metadata_text(std::string_view text, bool strict = false);

Json item_to_json(const ItemMeta& item);
Json event_to_json(const InteractionEvent& event);
InteractionEvent event_from_json(const Json& row);

inline std::int64_t day_key_of(std::int64_t timestamp) {
    return timestamp >= 0 ? timestamp / kSecondsPerDay : -((-timestamp + kSecondsPerDay - 1) / kSecondsPerDay);
}

/// Groups events by (user, UTC day); sessions come out ordered by their
/// first event (ties: user_id, then day).
std::vector<Session> sessionize(std::span<const InteractionEvent> events);

struct SplitRatios {
    double train = 0.8;
    double valid = 0.1;
    double test = 0.1;
};

struct SessionSplit {
    std::vector<Session> train;
    std::vector<Session> valid;
    std::vector<Session> test;
};

/// Chronological split by session end time. The first floor(train*N)
/// sessions train, up to floor((train+valid)*N) validate, the rest test.
/// Throws InvalidInput for fewer than 3 sessions or ratios not summing to 1.
SessionSplit split_sessions(std::vector<Session> sessions, const SplitRatios& ratios);

/// A ranking task: history, ground-truth next item, and a candidate pool.
struct EvalInstance {
    std::string user_id;
    std::int64_t day_key = 0;
    std::vector<InteractionEvent> history;  // most recent last, <= h_max
    std::string ground_truth;
    std::vector<std::string> candidates;
    std::uint64_t seed = 0;
};

struct PoolOptions {
    std::size_t pool_size = 20;
    std::size_t h_max = 100;
};

/// Builds one instance from `session`. The last session event is the ground
/// truth; history is `prior_events` followed by the rest of the session,
/// truncated to the most recent h_max. Negatives are drawn uniformly without
/// replacement from catalog items outside `exclude`, the history, and the
/// ground truth; the pool order is shuffled under `seed`.
EvalInstance build_eval_instance(const Session& session, std::span<const InteractionEvent> prior_events,
                                 const std::set<std::string>& exclude, const Catalog& catalog,
                                 const PoolOptions& options, std::uint64_t seed);

Json instance_to_json(const EvalInstance& instance);
EvalInstance instance_from_json(const Json& row);

/// Per-user event timelines, each sorted by timestamp (stable).
std::map<std::string, std::vector<InteractionEvent>> events_by_user(std::span<const InteractionEvent> events);

struct InstanceBuildResult {
    std::vector<EvalInstance> instances;
    std::size_t skipped_short = 0;  // sessions with fewer than 2 events
};

/// Builds instances for every eligible session in `sessions`. Prior events
/// are the user's events on earlier days; `exclude` is the user's full item
/// history. Seeds derive from `root_seed` and the session key.
InstanceBuildResult build_eval_instances(const std::vector<Session>& sessions,
                                         const std::map<std::string, std::vector<InteractionEvent>>& timelines,
                                         const Catalog& catalog, const PoolOptions& options,
                                         std::uint64_t root_seed);

/// Reproducibility record for a split: seed, counts, boundary timestamps.
Json split_manifest(const SessionSplit& split, const SplitRatios& ratios, std::uint64_t seed);

}  // namespace r3rec
