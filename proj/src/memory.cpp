#include "r3rec/memory.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

#include "r3rec/common.hpp"
#include "r3rec/text.hpp"

namespace r3rec {

namespace {

constexpr double kMinNormalizer = 1e-12;
constexpr char kPostingsMagic[4] = {'R', '3', 'P', 'M'};
constexpr std::uint32_t kPostingsVersion = 1;

void add_tokens(TokenBag& bag, std::string_view text) {
    for (const auto& t : tokenize(text)) ++bag[t];
}

}  // namespace

UserSketch build_sketch(const std::string& user_id, const IntentProfile& profile,
                        std::span<const InteractionEvent> history, const ItemKeywords& item_keywords,
                        const EmbeddingProvider& provider, const SketchConfig& config) {
    UserSketch s;
    s.user_id = user_id;
    if (history.empty()) {
        s.text = "intents: none";
        s.dense = Embedding::zeros(provider.dimension());
        return s;
    }
    std::vector<std::string> intents;
    for (const auto& [k, w] : profile.top_intents) {
        if (k == kUnknownCategory) continue;
        intents.push_back(k);
        add_tokens(s.sparse, k);
    }
    std::vector<std::string> likes;
    std::set<std::string> seen;
    for (auto it = history.rbegin(); it != history.rend(); ++it) {
        if (it->sign <= 0) continue;
        auto kw = item_keywords.find(it->item_id);
        if (kw == item_keywords.end()) continue;
        for (const auto& p : kw->second) {
            add_tokens(s.sparse, p);
            if (likes.size() < config.n_keyphrases && seen.insert(p).second) likes.push_back(p);
        }
    }
    s.text = "intents: " + (intents.empty() ? std::string("none") : join_tokens(intents, ", ")) +
             " | likes: " + (likes.empty() ? std::string("none") : join_tokens(likes, ", "));
    s.dense = provider.embed(s.text);
    return s;
}

std::vector<std::string> sketch_likes(const std::string& text) {
    const auto pos = text.find("likes: ");
    if (pos == std::string::npos) return {};
    const auto list = text.substr(pos + 7);
    if (list == "none") return {};
    std::vector<std::string> out;
    for (const auto& p : split(list, ',')) {
        auto t = std::string(trim(p));
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

void RetrievalConfig::validate() const {
    if (k == 0) throw InvalidInput("neighbor count K must be positive");
    if (!(lambda_mix >= 0.0 && lambda_mix <= 1.0)) throw InvalidInput("lambda_mix must be in [0, 1]");
    if (!(lambda_mmr >= 0.0 && lambda_mmr <= 1.0)) throw InvalidInput("lambda_mmr must be in [0, 1]");
    if (!(bm25_cutoff >= 0.0 && bm25_cutoff <= 1.0)) throw InvalidInput("bm25_cutoff must be in [0, 1]");
}

double hybrid_similarity(double bm25, double z_bm, double cosine, double lambda_mix) {
    return lambda_mix * bm25 / std::max(z_bm, kMinNormalizer) + (1.0 - lambda_mix) * cosine;
}

double bm25_term(double idf, double tf, double doc_length, double avg_length, const Bm25Params& p) {
    const double ratio = avg_length > 0.0 ? doc_length / avg_length : 1.0;
    return idf * tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * ratio));
}

std::vector<std::size_t> mmr_order(std::span<const double> sims, std::span<const Embedding> embeddings,
                                   std::span<const std::string> ids, double lambda_mmr, std::size_t m_out) {
    const std::size_t n = sims.size();
    if (embeddings.size() != n || ids.size() != n) throw InvalidInput("mmr inputs differ in length");
    std::vector<std::size_t> order;
    std::vector<char> used(n, 0);
    while (order.size() < std::min(m_out, n)) {
        std::size_t best = n;
        double best_score = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (used[i]) continue;
            double score = sims[i];
            if (!order.empty()) {
                double redundancy = -1.0;
                for (auto j : order) redundancy = std::max(redundancy, cosine(embeddings[i], embeddings[j]));
                score = lambda_mmr * sims[i] - (1.0 - lambda_mmr) * redundancy;
            }
            if (best == n || score > best_score || (score == best_score && ids[i] < ids[best])) {
                best = i;
                best_score = score;
            }
        }
        used[best] = 1;
        order.push_back(best);
    }
    return order;
}

// ---------------------------------------------------------------------------

void MemoryIndex::add(UserSketch sketch) {
    if (frozen_) throw InvalidInput("memory index is frozen");
    if (by_user_.count(sketch.user_id)) throw InvalidInput("duplicate user in memory: " + sketch.user_id);
    by_user_[sketch.user_id] = entries_.size();
    entries_.push_back(std::move(sketch));
}

void MemoryIndex::freeze() {
    if (frozen_) return;
    postings_.clear();
    lengths_.assign(entries_.size(), 0);
    std::size_t total = 0;
    for (std::size_t d = 0; d < entries_.size(); ++d) {
        for (const auto& [token, tf] : entries_[d].sparse) {
            if (tf == 0) continue;
            postings_[token].push_back({static_cast<std::uint32_t>(d), tf});
            lengths_[d] += tf;
        }
        total += lengths_[d];
    }
    avg_length_ = entries_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(entries_.size());
    frozen_ = true;
}

void MemoryIndex::require_frozen() const {
    if (!frozen_) throw InvalidInput("memory index queried before freeze()");
}

const UserSketch* MemoryIndex::find(const std::string& user_id) const {
    auto it = by_user_.find(user_id);
    return it == by_user_.end() ? nullptr : &entries_[it->second];
}

double MemoryIndex::average_length() const {
    require_frozen();
    return avg_length_;
}

std::size_t MemoryIndex::document_length(std::size_t doc) const {
    require_frozen();
    return lengths_.at(doc);
}

std::size_t MemoryIndex::document_frequency(const std::string& token) const {
    require_frozen();
    auto it = postings_.find(token);
    return it == postings_.end() ? 0 : it->second.size();
}

double MemoryIndex::idf(const std::string& token) const {
    const double n = static_cast<double>(entries_.size());
    const double df = static_cast<double>(document_frequency(token));
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

const std::vector<Posting>& MemoryIndex::postings(const std::string& token) const {
    require_frozen();
    static const std::vector<Posting> kEmpty;
    auto it = postings_.find(token);
    return it == postings_.end() ? kEmpty : it->second;
}

std::vector<std::string> MemoryIndex::vocabulary() const {
    require_frozen();
    std::vector<std::string> out;
    for (const auto& [t, p] : postings_) out.push_back(t);
    return out;
}

double MemoryIndex::bm25(const TokenBag& query, std::size_t doc) const {
    require_frozen();
    const auto& bag = entries_.at(doc).sparse;
    double score = 0.0;
    for (const auto& [token, qtf] : query) {
        (void)qtf;
        auto it = bag.find(token);
        if (it == bag.end() || it->second == 0) continue;
        score += bm25_term(idf(token), it->second, static_cast<double>(lengths_[doc]), avg_length_, params_);
    }
    return score;
}

RetrievalResult MemoryIndex::retrieve(const std::string& user_id, const RetrievalConfig& config) const {
    require_frozen();
    const UserSketch* self = find(user_id);
    if (!self) throw InvalidInput("user not in memory: " + user_id);
    return retrieve_for(*self, config);
}

RetrievalResult MemoryIndex::retrieve_for(const UserSketch& query, const RetrievalConfig& config) const {
    require_frozen();
    config.validate();
    const std::size_t n = entries_.size();

    // Term-at-a-time accumulation over the query's posting lists, in the
    // same token order bm25() uses, so the sums agree bit for bit.
    std::vector<double> acc(n, 0.0);
    std::vector<char> touched(n, 0);
    for (const auto& [token, qtf] : query.sparse) {
        (void)qtf;
        auto it = postings_.find(token);
        if (it == postings_.end()) continue;
        const double w = idf(token);
        for (const auto& p : it->second) {
            acc[p.doc] += bm25_term(w, p.tf, static_cast<double>(lengths_[p.doc]), avg_length_, params_);
            touched[p.doc] = 1;
        }
    }

    // With a positive cutoff only documents sharing a token can survive, so
    // the posting lists bound the candidate set exactly.
    const bool prune = config.bm25_cutoff > 0.0;
    std::vector<std::size_t> candidates;
    for (std::size_t d = 0; d < n; ++d) {
        if (entries_[d].user_id == query.user_id) continue;
        if (prune && !touched[d]) continue;
        candidates.push_back(d);
    }
    double z_bm = 0.0;
    for (auto d : candidates) z_bm = std::max(z_bm, acc[d]);
    z_bm = std::max(z_bm, kMinNormalizer);

    RetrievalResult result;
    for (auto d : candidates) {
        if (prune && acc[d] / z_bm < config.bm25_cutoff) continue;
        const double cos = cosine(query.dense, entries_[d].dense);
        result.ranked.push_back({entries_[d].user_id, hybrid_similarity(acc[d], z_bm, cos, config.lambda_mix), acc[d], cos});
    }
    std::sort(result.ranked.begin(), result.ranked.end(), [](const Neighbor& a, const Neighbor& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        return a.user_id < b.user_id;
    });
    if (result.ranked.size() > config.k) result.ranked.resize(config.k);

    std::vector<double> sims;
    std::vector<Embedding> embeddings;
    std::vector<std::string> ids;
    for (const auto& nb : result.ranked) {
        sims.push_back(nb.sim);
        embeddings.push_back(find(nb.user_id)->dense);
        ids.push_back(nb.user_id);
    }
    for (auto i : mmr_order(sims, embeddings, ids, config.lambda_mmr, config.m_out)) result.mmr_order.push_back(ids[i]);
    return result;
}

// ---------------------------------------------------------------------------
// Persistence

Json sketch_to_json(const UserSketch& s) {
    return {{"user_id", s.user_id}, {"text", s.text}, {"dense", s.dense.values()}, {"sparse", s.sparse}};
}

UserSketch sketch_from_json(const Json& row) {
    UserSketch s;
    s.user_id = row.at("user_id").get<std::string>();
    s.text = row.at("text").get<std::string>();
    s.dense = Embedding(row.at("dense").get<std::vector<double>>());
    s.sparse = row.at("sparse").get<TokenBag>();
    return s;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
    if (pos + 4 > in.size()) throw ParseError("postings.bin truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

std::string encode_postings(const std::map<std::string, std::vector<Posting>>& postings) {
    std::string out(kPostingsMagic, 4);
    put_u32(out, kPostingsVersion);
    put_u32(out, static_cast<std::uint32_t>(postings.size()));
    for (const auto& [token, list] : postings) {
        put_u32(out, static_cast<std::uint32_t>(token.size()));
        out += token;
        put_u32(out, static_cast<std::uint32_t>(list.size()));
        for (const auto& p : list) {
            put_u32(out, p.doc);
            put_u32(out, p.tf);
        }
    }
    return out;
}

std::map<std::string, std::vector<Posting>> decode_postings(const std::string& in) {
    if (in.size() < 4 || std::memcmp(in.data(), kPostingsMagic, 4) != 0) throw ParseError("postings.bin: bad magic");
    std::size_t pos = 4;
    if (get_u32(in, pos) != kPostingsVersion) throw ParseError("postings.bin: unsupported version");
    std::map<std::string, std::vector<Posting>> out;
    const auto n_tokens = get_u32(in, pos);
    for (std::uint32_t t = 0; t < n_tokens; ++t) {
        const auto len = get_u32(in, pos);
        if (pos + len > in.size()) throw ParseError("postings.bin truncated");
        std::string token = in.substr(pos, len);
        pos += len;
        auto& list = out[token];
        const auto n = get_u32(in, pos);
        for (std::uint32_t i = 0; i < n; ++i) {
            Posting p;
            p.doc = get_u32(in, pos);
            p.tf = get_u32(in, pos);
            list.push_back(p);
        }
    }
    if (pos != in.size()) throw ParseError("postings.bin has trailing bytes");
    return out;
}

}  // namespace

void MemoryIndex::save(const std::filesystem::path& dir, std::uint64_t build_seed,
                       const EmbeddingProvider& provider) const {
    require_frozen();
    std::vector<Json> rows;
    rows.reserve(entries_.size());
    for (const auto& s : entries_) rows.push_back(sketch_to_json(s));
    write_jsonl_atomic(dir / "sketches.jsonl", rows);
    write_file_atomic(dir / "postings.bin", encode_postings(postings_));
    const Json stats = {{"format", "r3rec.memory"},
                        {"version", 1},
                        {"build_seed", build_seed},
                        {"provider_kind", provider_kind_name(provider.kind())},
                        {"provider_fingerprint", provider.fingerprint()},
                        {"dimension", provider.dimension()},
                        {"users", entries_.size()},
                        {"vocabulary", postings_.size()},
                        {"average_length", avg_length_},
                        {"k1", params_.k1},
                        {"b", params_.b}};
    write_file_atomic(dir / "stats.json", stats.dump(2) + "\n");
}

MemoryIndex MemoryIndex::load(const std::filesystem::path& dir) {
    const Json stats = Json::parse(read_file(dir / "stats.json"));
    MemoryIndex index(Bm25Params{stats.at("k1").get<double>(), stats.at("b").get<double>()});
    for (const auto& row : read_jsonl(dir / "sketches.jsonl")) index.add(sketch_from_json(row));
    index.freeze();
    if (decode_postings(read_file(dir / "postings.bin")) != index.postings_) {
        throw ParseError("postings.bin does not match the stored sketches");
    }
    return index;
}

}  // namespace r3rec
