#include "r3rec/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <variant>

#include "r3rec/common.hpp"
#include "r3rec/io.hpp"
#include "r3rec/random.hpp"
#include "r3rec/text.hpp"

namespace r3rec {

namespace {

using Member = std::variant<double PipelineConfig::*, std::size_t PipelineConfig::*, int PipelineConfig::*,
                            bool PipelineConfig::*, std::string PipelineConfig::*, unsigned long long PipelineConfig::*>;

struct Field {
    const char* key;
    Member member;
};

const std::vector<Field>& fields() {
    using C = PipelineConfig;
    static const std::vector<Field> table = {
        {"ablation.disable_item_semantics", &C::disable_item_semantics},
        {"ablation.disable_multilevel_intent", &C::disable_multilevel_intent},
        {"ablation.disable_polarity", &C::disable_polarity},
        {"ablation.disable_similar_users", &C::disable_similar_users},
        {"cost.price_input_per_1k", &C::price_input_per_1k},
        {"cost.price_output_per_1k", &C::price_output_per_1k},
        {"data.format", &C::format},
        {"data.implicit_feedback", &C::implicit_feedback},
        {"data.interactions", &C::interactions},
        {"data.items", &C::items},
        {"data.sign_threshold", &C::sign_threshold},
        {"data.strict", &C::strict},
        {"embedding.cache_dir", &C::cache_dir},
        {"embedding.dimension", &C::dimension},
        {"embedding.embedder", &C::embedder},
        {"intent.half_life_days", &C::half_life_days},
        {"intent.kappa", &C::kappa},
        {"intent.n_intent", &C::n_intent},
        {"intent.window_months", &C::window_months},
        {"itemsem.abstractive", &C::abstractive},
        {"itemsem.alpha", &C::alpha},
        {"itemsem.budget_max", &C::budget_max},
        {"itemsem.budget_min", &C::budget_min},
        {"itemsem.eps_gain", &C::eps_gain},
        {"itemsem.lambda_cov", &C::lambda_cov},
        {"itemsem.max_phrase_tokens", &C::max_phrase_tokens},
        {"itemsem.tau_pmi", &C::tau_pmi},
        {"judge.backend", &C::backend},
        {"judge.batched", &C::batched},
        {"judge.calib_t", &C::calib_t},
        {"judge.judge_temperature", &C::judge_temperature},
        {"judge.max_in_flight", &C::max_in_flight},
        {"judge.max_tokens", &C::max_tokens},
        {"judge.templates_dir", &C::templates_dir},
        {"memory.bm25_b", &C::bm25_b},
        {"memory.bm25_cutoff", &C::bm25_cutoff},
        {"memory.bm25_k1", &C::bm25_k1},
        {"memory.k", &C::k},
        {"memory.lambda_mix", &C::lambda_mix},
        {"memory.lambda_mmr", &C::lambda_mmr},
        {"memory.m_out", &C::m_out},
        {"memory.sketch_keyphrases", &C::sketch_keyphrases},
        {"polarity.adapter_epochs", &C::adapter_epochs},
        {"polarity.adapter_lr", &C::adapter_lr},
        {"polarity.fused_dim", &C::fused_dim},
        {"polarity.long_months", &C::long_months},
        {"polarity.n_keywords", &C::n_keywords},
        {"polarity.short_months", &C::short_months},
        {"polarity.skip_adapter", &C::skip_adapter},
        {"protocol.h_max", &C::h_max},
        {"protocol.max_instances", &C::max_instances},
        {"protocol.pool_size", &C::pool_size},
        {"protocol.split_test", &C::split_test},
        {"protocol.split_train", &C::split_train},
        {"protocol.split_valid", &C::split_valid},
        {"run.out", &C::out},
        {"run.seed", &C::seed},
        {"run.trace", &C::trace},
        {"run.workers", &C::workers},
        {"sweep.cache", &C::sweep_cache},
        {"sweep.grid", &C::sweep_grid},
    };
    return table;
}

const Field& field_for(const std::string& key) {
    for (const auto& f : fields()) {
        if (key == f.key) return f;
    }
    throw InvalidInput("unknown configuration key: " + key);
}

template <typename T>
T parse_number(const std::string& key, std::string_view text) {
    T value{};
    const auto t = trim(text);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
        throw InvalidInput("configuration key " + key + ": cannot parse '" + std::string(t) + "'");
    }
    return value;
}

bool parse_bool(const std::string& key, std::string_view text) {
    const auto t = normalize_text(text);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw InvalidInput("configuration key " + key + ": expected a boolean, got '" + std::string(text) + "'");
}

std::string render_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, ptr);
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
    const auto& f = field_for(key);
    std::visit(
        [&](auto member) {
            using T = std::remove_reference_t<decltype(this->*member)>;
            if constexpr (std::is_same_v<T, bool>) {
                this->*member = parse_bool(key, value);
            } else if constexpr (std::is_same_v<T, std::string>) {
                this->*member = std::string(trim(value));
            } else {
                this->*member = parse_number<T>(key, value);
            }
        },
        f.member);
}

std::string PipelineConfig::get(const std::string& key) const {
    const auto& f = field_for(key);
    return std::visit(
        [&](auto member) -> std::string {
            using T = std::remove_cv_t<std::remove_reference_t<decltype(this->*member)>>;
            const auto& v = this->*member;
            if constexpr (std::is_same_v<T, bool>) {
                return v ? "true" : "false";
            } else if constexpr (std::is_same_v<T, std::string>) {
                return v;
            } else if constexpr (std::is_same_v<T, double>) {
                return render_double(v);
            } else {
                return std::to_string(v);
            }
        },
        f.member);
}

std::vector<std::string> PipelineConfig::keys() {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.emplace_back(f.key);
    return out;
}

void PipelineConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw InvalidInput("invalid configuration: " + what);
    };
    require(format == "auto" || format == "delimited" || format == "jsonl", "data.format must be auto|delimited|jsonl");
    require(split_train > 0 && split_valid >= 0 && split_test > 0 &&
                std::abs(split_train + split_valid + split_test - 1.0) <= 1e-9,
            "protocol split ratios must be positive and sum to 1");
    require(pool_size >= 2, "protocol.pool_size must be >= 2");
    require(h_max >= 1, "protocol.h_max must be >= 1");
    require(n_intent >= 1, "intent.n_intent must be >= 1");
    require(kappa > 0, "intent.kappa must be > 0");
    require(half_life_days > 0, "intent.half_life_days must be > 0");
    require(window_months > 0, "intent.window_months must be > 0");
    require(short_months > 0 && short_months < long_months, "polarity needs 0 < short_months < long_months");
    require(n_keywords >= 1, "polarity.n_keywords must be >= 1");
    require(fused_dim >= 1, "polarity.fused_dim must be >= 1");
    require(adapter_lr > 0, "polarity.adapter_lr must be > 0");
    require(adapter_epochs >= 0, "polarity.adapter_epochs must be >= 0");
    require(budget_min >= 1 && budget_min <= budget_max, "itemsem needs 1 <= budget_min <= budget_max");
    require(lambda_cov >= 0, "itemsem.lambda_cov must be >= 0");
    require(alpha >= 0 && alpha <= 1, "itemsem.alpha must be in [0, 1]");
    require(eps_gain >= 0, "itemsem.eps_gain must be >= 0");
    require(max_phrase_tokens >= 1, "itemsem.max_phrase_tokens must be >= 1");
    require(k >= 1, "memory.k must be >= 1");
    require(lambda_mix >= 0 && lambda_mix <= 1, "memory.lambda_mix must be in [0, 1]");
    require(bm25_cutoff >= 0 && bm25_cutoff <= 1, "memory.bm25_cutoff must be in [0, 1]");
    require(lambda_mmr >= 0 && lambda_mmr <= 1, "memory.lambda_mmr must be in [0, 1]");
    require(m_out >= 1, "memory.m_out must be >= 1");
    require(bm25_k1 >= 0 && bm25_b >= 0 && bm25_b <= 1, "memory BM25 needs k1 >= 0 and b in [0, 1]");
    require(backend == "mock" || backend == "live", "judge.backend must be mock|live");
    require(judge_temperature >= 0, "judge.judge_temperature must be >= 0");
    require(max_tokens >= 1 && max_tokens <= 20, "judge.max_tokens must be in [1, 20]");
    require(calib_t > 0, "judge.calib_t must be > 0");
    require(max_in_flight >= 1, "judge.max_in_flight must be >= 1");
    require(embedder == "hashed" || embedder == "remote", "embedding.embedder must be hashed|remote");
    require(dimension >= 1, "embedding.dimension must be >= 1");
    require(price_input_per_1k >= 0 && price_output_per_1k >= 0, "cost rates must be >= 0");
    require(workers >= 1, "run.workers must be >= 1");
    require(!out.empty(), "run.out must not be empty");
    if (!sweep_grid.empty()) expand_grid(sweep_grid);
}

std::string PipelineConfig::canonical() const {
    std::string out;
    for (const auto& f : fields()) out += std::string(f.key) + " = " + get(f.key) + "\n";
    return out;
}

std::string PipelineConfig::hash(const std::vector<std::string>& sections) const {
    std::string text;
    for (const auto& f : fields()) {
        const std::string key = f.key;
        const auto section = key.substr(0, key.find('.'));
        if (!sections.empty() && std::find(sections.begin(), sections.end(), section) == sections.end() &&
            std::find(sections.begin(), sections.end(), key) == sections.end()) {
            continue;
        }
        text += key + " = " + get(key) + "\n";
    }
    return hex64(fnv1a64(text));
}

AblationConfig PipelineConfig::ablation() const {
    return {disable_item_semantics, disable_similar_users, disable_multilevel_intent, disable_polarity};
}

void PipelineConfig::set_ablation(const AblationConfig& a) {
    disable_item_semantics = a.disable_item_semantics;
    disable_similar_users = a.disable_similar_users;
    disable_multilevel_intent = a.disable_multilevel_intent;
    disable_polarity = a.disable_polarity;
}

void apply_config_text(PipelineConfig& config, const std::string& text) {
    std::string section;
    std::size_t line_no = 0;
    for (const auto& raw : split(text, '\n')) {
        ++line_no;
        auto line = raw;
        const auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        const auto t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw InvalidInput("config line " + std::to_string(line_no) + ": bad section header");
            section = std::string(trim(t.substr(1, t.size() - 2)));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) throw InvalidInput("config line " + std::to_string(line_no) + ": expected key = value");
        if (section.empty()) throw InvalidInput("config line " + std::to_string(line_no) + ": key outside a section");
        config.set(section + "." + std::string(trim(t.substr(0, eq))), std::string(trim(t.substr(eq + 1))));
    }
}

void apply_config_file(PipelineConfig& config, const std::filesystem::path& path) {
    apply_config_text(config, read_file(path));
}

std::vector<std::vector<std::pair<std::string, std::string>>> expand_grid(const std::string& grid) {
    std::vector<std::pair<std::string, std::vector<std::string>>> axes;
    for (const auto& raw : split(grid, ';')) {
        const auto t = trim(raw);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) throw InvalidInput("sweep grid entry needs key=v1,v2: " + std::string(t));
        const std::string key(trim(t.substr(0, eq)));
        field_for(key);
        std::vector<std::string> values;
        for (const auto& v : split(t.substr(eq + 1), ',')) {
            if (!trim(v).empty()) values.emplace_back(trim(v));
        }
        if (values.empty()) throw InvalidInput("sweep grid key without values: " + key);
        axes.emplace_back(key, std::move(values));
    }
    if (axes.empty()) throw InvalidInput("sweep grid is empty");
    std::vector<std::vector<std::pair<std::string, std::string>>> points{{}};
    for (const auto& [key, values] : axes) {
        std::vector<std::vector<std::pair<std::string, std::string>>> next;
        for (const auto& p : points) {
            for (const auto& v : values) {
                auto q = p;
                q.emplace_back(key, v);
                next.push_back(std::move(q));
            }
        }
        points = std::move(next);
    }
    return points;
}

}  // namespace r3rec
