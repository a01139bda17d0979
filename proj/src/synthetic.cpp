#include "r3rec/synthetic.hpp"

#include <algorithm>
#include <optional>
#include <set>
#include <vector>

#include "r3rec/common.hpp"
#include "r3rec/io.hpp"
#include "r3rec/random.hpp"
#include "r3rec/text.hpp"

namespace r3rec {

namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";
constexpr const char* kCategoryNames[] = {"arcade", "strategy", "puzzle", "racing", "simulation"};

class WordFactory {
public:
    explicit WordFactory(std::uint64_t seed) : rng_(seed) {}

    std::string next(std::size_t syllables) {
        for (;;) {
            std::string w;
            for (std::size_t s = 0; s < syllables; ++s) {
                w.push_back(kConsonants[rng_.uniform_index(kConsonants.size())]);
                w.push_back(kVowels[rng_.uniform_index(kVowels.size())]);
            }
            if (!is_stopword(w) && used_.insert(w).second) return w;
        }
    }

private:
    Rng rng_;
    std::set<std::string> used_;
};

template <typename T>
const T& pick(const std::vector<T>& values, Rng& rng) {
    return values[rng.uniform_index(values.size())];
}

std::vector<std::size_t> sample_distinct(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    rng.shuffle(all);
    all.resize(std::min(k, n));
    return all;
}

struct Cluster {
    std::vector<std::size_t> liked;  // three themes
    std::size_t disliked = 0;
};

}  // namespace

SyntheticFiles generate_synthetic(const SyntheticConfig& config, const std::filesystem::path& dir) {
    if (config.themes < 4 || config.items < config.themes || config.users == 0 || config.clusters == 0 ||
        config.sessions_per_user < 2 || config.categories == 0) {
        throw InvalidInput("synthetic corpus: need >= 4 themes, >= 1 item per theme, users, clusters, >= 2 sessions");
    }
    Rng rng(derive_seed(config.seed, "synthetic"));
    WordFactory words(derive_seed(config.seed, "words"));

    std::vector<std::vector<std::string>> theme_keywords(config.themes);
    for (auto& kw : theme_keywords) {
        for (std::size_t i = 0; i < config.keywords_per_theme; ++i) kw.push_back(words.next(3));
    }
    std::vector<std::string> noise;
    for (std::size_t i = 0; i < 200; ++i) noise.push_back(words.next(2));

    std::vector<std::vector<std::size_t>> theme_items(config.themes);
    std::vector<Json> item_rows;
    for (std::size_t i = 0; i < config.items; ++i) {
        const std::size_t theme = i % config.themes;
        theme_items[theme].push_back(i);
        const auto& kw = theme_keywords[theme];
        std::string description = "Highlights: ";
        const auto chosen = sample_distinct(kw.size(), 4, rng);
        for (std::size_t j = 0; j < chosen.size(); ++j) {
            if (j) description += ", ";
            description += kw[chosen[j]];
        }
        description += ". The " + pick(noise, rng) + " " + pick(noise, rng) + " of it is all about " + kw[chosen[0]] +
                       " and " + kw[chosen[1]] + ".";
        const std::size_t category = theme % config.categories;
        const std::string category_name = category < std::size(kCategoryNames)
                                              ? kCategoryNames[category]
                                              : "category-" + std::to_string(category);
        item_rows.push_back({{"item_id", std::to_string(i + 1)},
                             {"title", pick(noise, rng) + " " + pick(noise, rng)},
                             {"categories", Json::array({category_name})},
                             {"description", description}});
    }

    std::vector<Cluster> clusters(config.clusters);
    for (auto& c : clusters) {
        const auto themes = sample_distinct(config.themes, 4, rng);
        c.liked = {themes[0], themes[1], themes[2]};
        c.disliked = themes[3];
    }

    struct Row {
        std::size_t user;
        std::size_t item;
        int rating;
        std::int64_t timestamp;
    };
    std::vector<Row> rows;
    constexpr std::int64_t kHistoryDays = 280;
    constexpr std::int64_t kFinalWindowDays = 20;
    for (std::size_t u = 0; u < config.users; ++u) {
        const Cluster& cluster = clusters[u % config.clusters];
        std::vector<std::size_t> visible = cluster.liked;
        rng.shuffle(visible);
        const std::size_t hidden = visible.back();
        visible.pop_back();

        std::set<std::size_t> seen;
        auto draw = [&](std::size_t theme) -> std::optional<std::size_t> {
            std::vector<std::size_t> fresh;
            for (auto i : theme_items[theme]) {
                if (!seen.count(i)) fresh.push_back(i);
            }
            if (fresh.empty()) return std::nullopt;
            const auto item = pick(fresh, rng);
            seen.insert(item);
            return item;
        };

        auto days = sample_distinct(static_cast<std::size_t>(kHistoryDays), config.sessions_per_user - 1, rng);
        std::sort(days.begin(), days.end());
        days.push_back(static_cast<std::size_t>(kHistoryDays) + rng.uniform_index(kFinalWindowDays));
        for (std::size_t s = 0; s < days.size(); ++s) {
            const bool final_session = s + 1 == days.size();
            const std::size_t n_events = 3 + rng.uniform_index(3);
            std::int64_t t = config.base_timestamp + static_cast<std::int64_t>(days[s]) * 86400 -
                             config.base_timestamp % 86400 + 3600 + static_cast<std::int64_t>(rng.uniform_index(36000));
            for (std::size_t e = 0; e < n_events; ++e) {
                std::optional<std::size_t> item;
                int rating = 0;
                if (final_session && e + 1 == n_events) {
                    const bool from_hidden = rng.uniform01() < config.hidden_target_rate;
                    item = draw(from_hidden ? hidden : pick(visible, rng));
                    rating = 5;
                } else if (rng.uniform01() < config.dislike_rate) {
                    item = draw(cluster.disliked);
                    rating = 1 + static_cast<int>(rng.uniform_index(2));
                } else {
                    item = draw(pick(visible, rng));
                    rating = 4 + static_cast<int>(rng.uniform_index(2));
                }
                t += 60 + static_cast<std::int64_t>(rng.uniform_index(600));
                if (item) rows.push_back({u, *item, rating, t});
            }
        }
    }

    std::filesystem::create_directories(dir);
    SyntheticFiles files;
    files.interactions = dir / "ratings.dat";
    files.items = dir / "items.jsonl";
    files.config = dir / "synthetic.ini";
    files.events = rows.size();
    std::string ratings;
    for (const auto& r : rows) {
        ratings += std::to_string(r.user + 1) + "::" + std::to_string(r.item + 1) + "::" + std::to_string(r.rating) +
                   "::" + std::to_string(r.timestamp) + "\n";
    }
    write_file_atomic(files.interactions, ratings);
    write_jsonl_atomic(files.items, item_rows);
    const auto abs = [](const std::filesystem::path& p) { return std::filesystem::absolute(p).lexically_normal().string(); };
    write_file_atomic(files.config, "[data]\ninteractions = " + abs(files.interactions) + "\nitems = " +
                                        abs(files.items) + "\nsign_threshold = 4\n");
    return files;
}

}  // namespace r3rec
