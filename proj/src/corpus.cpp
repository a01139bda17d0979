#include "r3rec/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "r3rec/common.hpp"
#include "r3rec/random.hpp"
#include "r3rec/text.hpp"

namespace r3rec {

namespace {

constexpr std::size_t kMaxSkipExamples = 5;

bool parse_int64(std::string_view s, std::int64_t& out) {
    s = trim(s);
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec == std::errc() && ptr == s.data() + s.size()) return true;
    // Accept integral-valued decimals such as "978300760.0".
    double d = 0.0;
    auto [p2, e2] = std::from_chars(s.data(), s.data() + s.size(), d);
    if (e2 != std::errc() || p2 != s.data() + s.size() || !std::isfinite(d) || d != std::floor(d)) return false;
    out = static_cast<std::int64_t>(d);
    return true;
}

bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

std::vector<std::string> split_fields(std::string_view line, std::string_view delim) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            fields.emplace_back(trim(line.substr(start)));
            break;
        }
        fields.emplace_back(trim(line.substr(start, pos - start)));
        start = pos + delim.size();
    }
    return fields;
}

std::string lower_ascii(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

struct ColumnMap {
    int user = 0, item = 1, rating = 2, timestamp = 3;
};

int find_column(const std::vector<std::string>& header, std::initializer_list<std::string_view> names) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto h = lower_ascii(header[i]);
        for (auto n : names) {
            if (h == n) return static_cast<int>(i);
        }
    }
    return -1;
}

class SkipCounter {
public:
    SkipCounter(ParseResult& result, bool strict) : result_(result), strict_(strict) {}

    void skip(std::size_t line_no, std::string_view line, std::string_view why) {
        std::string msg = "line " + std::to_string(line_no) + ": " + std::string(why) + ": " +
                          std::string(line.substr(0, 120));
        if (strict_) throw ParseError("malformed interaction record, " + msg);
        ++result_.skipped;
        if (result_.skipped_examples.size() < kMaxSkipExamples) result_.skipped_examples.push_back(std::move(msg));
    }

private:
    ParseResult& result_;
    bool strict_;
};

std::string json_scalar_to_string(const Json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
    if (v.is_number_float()) {
        std::ostringstream ss;
        ss << v.get<double>();
        return ss.str();
    }
    return {};
}

const Json* first_key(const Json& obj, std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
        auto it = obj.find(k);
        if (it != obj.end() && !it->is_null()) return &*it;
    }
    return nullptr;
}

ParseResult parse_delimited(std::string_view text, const ParseOptions& options) {
    ParseResult result;
    SkipCounter skipper(result, options.strict);

    std::string delim;
    ColumnMap columns;
    bool first = true;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line).empty()) {
            if (end == text.size()) break;
            continue;
        }

        if (delim.empty()) {
            if (line.find("::") != std::string_view::npos) delim = "::";
            else if (line.find('\t') != std::string_view::npos) delim = "\t";
            else delim = ",";
        }
        auto fields = split_fields(line, delim);

        if (first) {
            first = false;
            const int user_col = find_column(fields, {"user", "user_id", "userid", "uid", "reviewerid"});
            const int ts_col = find_column(fields, {"timestamp", "time", "ts", "unixreviewtime", "unix_time"});
            if (user_col >= 0 || ts_col >= 0) {
                columns.user = user_col;
                columns.item = find_column(fields, {"item", "item_id", "itemid", "movie_id", "movieid", "asin", "iid"});
                columns.rating = find_column(fields, {"rating", "score", "overall", "stars"});
                columns.timestamp = ts_col;
                if (columns.user < 0 || columns.item < 0 || columns.timestamp < 0) {
                    throw ParseError("interaction header lacks user/item/timestamp columns: " + std::string(line));
                }
                continue;
            }
        }

        const int needed = std::max({columns.user, columns.item, columns.rating, columns.timestamp});
        if (static_cast<int>(fields.size()) <= needed) {
            skipper.skip(line_no, line, "too few fields");
            continue;
        }
        InteractionEvent ev;
        ev.user_id = fields[columns.user];
        ev.item_id = fields[columns.item];
        if (ev.user_id.empty() || ev.item_id.empty()) {
            skipper.skip(line_no, line, "empty user or item");
            continue;
        }
        if (columns.rating >= 0) {
            if (!parse_double(fields[columns.rating], ev.rating)) {
                skipper.skip(line_no, line, "non-numeric rating");
                continue;
            }
        } else {
            ev.rating = 1.0;
        }
        if (!parse_int64(fields[columns.timestamp], ev.timestamp)) {
            skipper.skip(line_no, line, "non-numeric timestamp");
            continue;
        }
        if (ev.timestamp <= 0) {
            skipper.skip(line_no, line, "non-positive timestamp");
            continue;
        }
        ev.sign = options.sign_rule.sign(ev.rating);
        result.events.push_back(std::move(ev));
        if (end == text.size()) break;
    }
    return result;
}

ParseResult parse_jsonl(std::string_view text, const ParseOptions& options) {
    ParseResult result;
    SkipCounter skipper(result, options.strict);
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (trim(line).empty()) continue;

        Json row;
        try {
            row = Json::parse(line);
        } catch (const Json::exception&) {
            skipper.skip(line_no, line, "invalid json");
            continue;
        }
        if (!row.is_object()) {
            skipper.skip(line_no, line, "not an object");
            continue;
        }
        const Json* user = first_key(row, {"user_id", "user", "reviewerID"});
        const Json* item = first_key(row, {"item_id", "item", "asin"});
        const Json* ts = first_key(row, {"timestamp", "time", "unixReviewTime"});
        const Json* rating = first_key(row, {"rating", "score", "overall"});
        if (!user || !item || !ts) {
            skipper.skip(line_no, line, "missing user/item/timestamp");
            continue;
        }
        InteractionEvent ev;
        ev.user_id = json_scalar_to_string(*user);
        ev.item_id = json_scalar_to_string(*item);
        if (ev.user_id.empty() || ev.item_id.empty()) {
            skipper.skip(line_no, line, "empty user or item");
            continue;
        }
        if (ts->is_number_integer() || ts->is_number_unsigned()) {
            ev.timestamp = ts->get<std::int64_t>();
        } else if (!parse_int64(json_scalar_to_string(*ts), ev.timestamp)) {
            skipper.skip(line_no, line, "non-numeric timestamp");
            continue;
        }
        if (ev.timestamp <= 0) {
            skipper.skip(line_no, line, "non-positive timestamp");
            continue;
        }
        if (rating) {
            if (rating->is_number()) {
                ev.rating = rating->get<double>();
            } else if (!parse_double(json_scalar_to_string(*rating), ev.rating)) {
                skipper.skip(line_no, line, "non-numeric rating");
                continue;
            }
        } else {
            ev.rating = 1.0;
        }
        ev.sign = options.sign_rule.sign(ev.rating);
        // Explicit polarity fields override the rating rule.
        if (auto it = row.find("sign"); it != row.end() && it->is_number()) {
            ev.sign = it->get<double>() < 0 ? -1 : 1;
        } else if (auto d = row.find("dislike"); d != row.end() && d->is_boolean()) {
            ev.sign = d->get<bool>() ? -1 : 1;
        }
        result.events.push_back(std::move(ev));
    }
    return result;
}

}  // namespace

// ---------------------------------------------------------------------------

void Catalog::add(ItemMeta item) {
    if (item.item_id.empty()) throw InvalidInput("item without item_id");
    if (index_.count(item.item_id)) throw InvalidInput("duplicate item_id in catalog: " + item.item_id);
    index_.emplace(item.item_id, items_.size());
    items_.push_back(std::move(item));
}

const ItemMeta* Catalog::find(std::string_view item_id) const {
    auto it = index_.find(std::string(item_id));
    return it == index_.end() ? nullptr : &items_[it->second];
}

ParseResult parse_interactions_text(std::string_view text, const ParseOptions& options) {
    if (options.format == InteractionFormat::kJsonl) return parse_jsonl(text, options);
    return parse_delimited(text, options);
}

ParseResult parse_interactions(const std::filesystem::path& path, const ParseOptions& options) {
    const std::string text = read_file(path);
    ParseOptions resolved = options;
    if (resolved.format == InteractionFormat::kAuto) {
        const auto ext = lower_ascii(path.extension().string());
        resolved.format = (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") ? InteractionFormat::kJsonl
                                                                                  : InteractionFormat::kDelimited;
    }
    auto result = parse_interactions_text(text, resolved);
    if (result.skipped > 0) {
        log_warn("skipped " + std::to_string(result.skipped) + " malformed interaction line(s) in " + path.string());
    }
    return result;
}

Catalog parse_item_metadata_text(std::string_view text, bool strict) {
    Catalog catalog;
    std::size_t line_no = 0;
    std::size_t start = 0;
    std::size_t skipped = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            const Json row = Json::parse(line);
            ItemMeta item;
            const Json* id = first_key(row, {"item_id", "id", "asin"});
            if (!id) throw ParseError("missing item_id");
            item.item_id = json_scalar_to_string(*id);
            if (auto it = row.find("title"); it != row.end() && it->is_string()) item.title = it->get<std::string>();
            if (auto it = row.find("description"); it != row.end()) {
                if (it->is_string()) {
                    item.description = it->get<std::string>();
                } else if (it->is_array()) {
                    for (const auto& part : *it) {
                        if (!part.is_string()) continue;
                        if (!item.description.empty()) item.description += ' ';
                        item.description += part.get<std::string>();
                    }
                }
            }
            if (auto it = row.find("categories"); it != row.end()) {
                if (it->is_array()) {
                    for (const auto& c : *it) {
                        auto s = json_scalar_to_string(c);
                        if (!s.empty()) item.categories.push_back(std::move(s));
                    }
                } else if (it->is_string()) {
                    // "Action|Comedy" style (ML-1M genres).
                    for (auto& s : split(it->get<std::string>(), '|')) {
                        auto t = std::string(trim(s));
                        if (!t.empty()) item.categories.push_back(std::move(t));
                    }
                }
            }
            for (const auto& [key, value] : row.items()) {
                if (key == "item_id" || key == "id" || key == "asin" || key == "title" || key == "description" ||
                    key == "categories") {
                    continue;
                }
                auto s = json_scalar_to_string(value);
                if (!s.empty()) item.extra_attributes[key] = std::move(s);
            }
            catalog.add(std::move(item));
        } catch (const std::exception& e) {
            if (strict) throw ParseError("item metadata line " + std::to_string(line_no) + ": " + e.what());
            ++skipped;
        }
    }
    if (skipped > 0) log_warn("skipped " + std::to_string(skipped) + " malformed item metadata line(s)");
    return catalog;
}

Catalog parse_item_metadata(const std::filesystem::path& path, bool strict) {
    return parse_item_metadata_text(read_file(path), strict);
}

Json item_to_json(const ItemMeta& item) {
    Json row = {{"item_id", item.item_id},
                {"title", item.title},
                {"categories", item.categories},
                {"description", item.description}};
    for (const auto& [k, v] : item.extra_attributes) row[k] = v;
    return row;
}

Json event_to_json(const InteractionEvent& e) {
    return {{"user_id", e.user_id}, {"item_id", e.item_id}, {"rating", e.rating},
            {"timestamp", e.timestamp}, {"sign", e.sign}};
}

InteractionEvent event_from_json(const Json& row) {
    InteractionEvent e;
    e.user_id = row.at("user_id").get<std::string>();
    e.item_id = row.at("item_id").get<std::string>();
    e.rating = row.at("rating").get<double>();
    e.timestamp = row.at("timestamp").get<std::int64_t>();
    e.sign = row.at("sign").get<int>();
    return e;
}

// ---------------------------------------------------------------------------

std::vector<Session> sessionize(std::span<const InteractionEvent> events) {
    std::map<std::pair<std::string, std::int64_t>, std::vector<InteractionEvent>> groups;
    for (const auto& e : events) groups[{e.user_id, day_key_of(e.timestamp)}].push_back(e);

    std::vector<Session> sessions;
    sessions.reserve(groups.size());
    for (auto& [key, evs] : groups) {
        std::stable_sort(evs.begin(), evs.end(),
                         [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
        sessions.push_back(Session{key.first, key.second, std::move(evs)});
    }
    std::stable_sort(sessions.begin(), sessions.end(), [](const Session& a, const Session& b) {
        if (a.start() != b.start()) return a.start() < b.start();
        if (a.user_id != b.user_id) return a.user_id < b.user_id;
        return a.day_key < b.day_key;
    });
    return sessions;
}

SessionSplit split_sessions(std::vector<Session> sessions, const SplitRatios& ratios) {
    if (sessions.size() < 3) {
        throw InvalidInput("split_sessions needs at least 3 sessions, got " + std::to_string(sessions.size()));
    }
    if (ratios.train < 0 || ratios.valid < 0 || ratios.test < 0 ||
        std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9) {
        throw InvalidInput("split ratios must be non-negative and sum to 1");
    }
    std::stable_sort(sessions.begin(), sessions.end(), [](const Session& a, const Session& b) {
        if (a.end() != b.end()) return a.end() < b.end();
        if (a.start() != b.start()) return a.start() < b.start();
        if (a.user_id != b.user_id) return a.user_id < b.user_id;
        return a.day_key < b.day_key;
    });
    const double n = static_cast<double>(sessions.size());
    // The epsilon absorbs representation error such as 0.8 + 0.1 != 0.9.
    const auto train_end = static_cast<std::size_t>(std::floor(ratios.train * n + 1e-9));
    const auto valid_end = std::max(
        train_end, static_cast<std::size_t>(std::floor((ratios.train + ratios.valid) * n + 1e-9)));

    SessionSplit out;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        auto& target = i < train_end ? out.train : (i < valid_end ? out.valid : out.test);
        target.push_back(std::move(sessions[i]));
    }
    if (out.valid.empty()) log_info("validation split is empty under the floor rule");
    return out;
}

// ---------------------------------------------------------------------------

EvalInstance build_eval_instance(const Session& session, std::span<const InteractionEvent> prior_events,
                                 const std::set<std::string>& exclude, const Catalog& catalog,
                                 const PoolOptions& options, std::uint64_t seed) {
    if (session.events.size() < 2) throw InvalidInput("session needs at least 2 events to form an instance");
    if (options.pool_size < 1) throw InvalidInput("pool size must be positive");
    if (catalog.size() < options.pool_size) {
        throw InvalidInput("catalog has " + std::to_string(catalog.size()) + " items, pool needs " +
                           std::to_string(options.pool_size));
    }

    EvalInstance inst;
    inst.user_id = session.user_id;
    inst.day_key = session.day_key;
    inst.seed = seed;
    inst.ground_truth = session.events.back().item_id;

    std::vector<InteractionEvent> history(prior_events.begin(), prior_events.end());
    history.insert(history.end(), session.events.begin(), session.events.end() - 1);
    std::set<std::string> blocked = exclude;
    for (const auto& e : history) blocked.insert(e.item_id);
    blocked.insert(inst.ground_truth);
    if (history.size() > options.h_max) {
        history.erase(history.begin(), history.end() - static_cast<std::ptrdiff_t>(options.h_max));
    }
    inst.history = std::move(history);

    std::vector<const std::string*> eligible;
    eligible.reserve(catalog.size());
    for (const auto& item : catalog.items()) {
        if (!blocked.count(item.item_id)) eligible.push_back(&item.item_id);
    }
    const std::size_t negatives = options.pool_size - 1;
    if (eligible.size() < negatives) {
        throw InvalidInput("catalog too small after exclusions: " + std::to_string(eligible.size()) +
                           " eligible items, need " + std::to_string(negatives));
    }

    Rng rng(seed);
    // Partial Fisher-Yates: the first `negatives` slots become the sample.
    for (std::size_t i = 0; i < negatives; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.uniform_index(eligible.size() - i));
        std::swap(eligible[i], eligible[j]);
    }
    inst.candidates.reserve(options.pool_size);
    for (std::size_t i = 0; i < negatives; ++i) inst.candidates.push_back(*eligible[i]);
    inst.candidates.push_back(inst.ground_truth);
    rng.shuffle(inst.candidates);
    return inst;
}

Json instance_to_json(const EvalInstance& inst) {
    Json history = Json::array();
    for (const auto& e : inst.history) history.push_back(event_to_json(e));
    return {{"user_id", inst.user_id}, {"day_key", inst.day_key},     {"seed", inst.seed},
            {"ground_truth", inst.ground_truth}, {"candidates", inst.candidates}, {"history", history}};
}

EvalInstance instance_from_json(const Json& row) {
    EvalInstance inst;
    inst.user_id = row.at("user_id").get<std::string>();
    inst.day_key = row.at("day_key").get<std::int64_t>();
    inst.seed = row.at("seed").get<std::uint64_t>();
    inst.ground_truth = row.at("ground_truth").get<std::string>();
    inst.candidates = row.at("candidates").get<std::vector<std::string>>();
    for (const auto& e : row.at("history")) inst.history.push_back(event_from_json(e));
    return inst;
}

std::map<std::string, std::vector<InteractionEvent>> events_by_user(std::span<const InteractionEvent> events) {
    std::map<std::string, std::vector<InteractionEvent>> out;
    for (const auto& e : events) out[e.user_id].push_back(e);
    for (auto& [user, evs] : out) {
        std::stable_sort(evs.begin(), evs.end(), [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    }
    return out;
}

InstanceBuildResult build_eval_instances(const std::vector<Session>& sessions,
                                         const std::map<std::string, std::vector<InteractionEvent>>& timelines,
                                         const Catalog& catalog, const PoolOptions& options,
                                         std::uint64_t root_seed) {
    InstanceBuildResult out;
    std::map<std::string, std::set<std::string>> user_items;
    for (const auto& s : sessions) {
        if (s.events.size() < 2) {
            ++out.skipped_short;
            continue;
        }
        auto it = timelines.find(s.user_id);
        std::span<const InteractionEvent> prior;
        auto& exclude = user_items[s.user_id];
        if (it != timelines.end()) {
            const auto& tl = it->second;
            const auto cut = std::find_if(tl.begin(), tl.end(),
                                          [&](const InteractionEvent& e) { return day_key_of(e.timestamp) >= s.day_key; });
            prior = std::span<const InteractionEvent>(tl.data(), static_cast<std::size_t>(cut - tl.begin()));
            if (exclude.empty()) {
                for (const auto& e : tl) exclude.insert(e.item_id);
            }
        }
        const auto seed = derive_seed(root_seed, s.user_id + "@" + std::to_string(s.day_key));
        out.instances.push_back(build_eval_instance(s, prior, exclude, catalog, options, seed));
    }
    return out;
}

Json split_manifest(const SessionSplit& split, const SplitRatios& ratios, std::uint64_t seed) {
    auto bounds = [](const std::vector<Session>& part) -> Json {
        if (part.empty()) return Json{{"count", 0}, {"events", 0}};
        std::int64_t first_start = part.front().start(), last_end = part.front().end();
        std::size_t events = 0;
        for (const auto& s : part) {
            first_start = std::min(first_start, s.start());
            last_end = std::max(last_end, s.end());
            events += s.events.size();
        }
        return Json{{"count", part.size()}, {"events", events}, {"min_start", first_start}, {"max_end", last_end}};
    };
    // Sessions from different users may overlap in time across a boundary;
    // report how many test sessions start before the last train session ends.
    std::size_t overlapping = 0;
    if (!split.train.empty()) {
        std::int64_t train_max_end = 0;
        for (const auto& s : split.train) train_max_end = std::max(train_max_end, s.end());
        for (const auto& s : split.test) overlapping += s.start() < train_max_end ? 1 : 0;
    }
    return Json{{"seed", seed},
                {"ratios", {ratios.train, ratios.valid, ratios.test}},
                {"train", bounds(split.train)},
                {"valid", bounds(split.valid)},
                {"test", bounds(split.test)},
                {"test_sessions_overlapping_train", overlapping}};
}

}  // namespace r3rec
