#pragma once

#include <array>
#include <atomic>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <openssl/evp.h>

#include "cequel/corpus.hpp"
#include "cequel/errors.hpp"
#include "cequel/jsonl.hpp"
#include "cequel/prompts.hpp"

namespace cequel {

enum class QueryMode { edge, triangle };

enum class EdgeAnswer { yes, no };

enum class TriangleAnswer { a, b, c, d, e };

/// One oracle question: the instance ids involved (triangles use all three,
/// edges leave c at -1) and the fully rendered prompt.
struct OracleQuery {
    QueryMode mode = QueryMode::edge;
    int a = 0;
    int b = 0;
    int c = -1;
    std::string prompt;
};

// ---------------------------------------------------------------------------
// Response parsing

namespace detail {

/// Lowercased alphanumeric tokens of a raw response.
inline std::vector<std::string> answer_tokens(const std::string& raw) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char ch : raw) {
        if (std::isalnum(ch)) {
            cur.push_back(static_cast<char>(std::tolower(ch)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

}  // namespace detail

/// Accepts "Yes"/"No" in any casing and with surrounding punctuation or
/// scaffolding ("Answer: yes."). The match must be unambiguous: a response
/// containing both candidates parses as nothing.
inline std::optional<EdgeAnswer> parse_edge_response(const std::string& raw) {
    bool saw_yes = false, saw_no = false;
    for (const auto& tok : detail::answer_tokens(raw)) {
        if (tok == "yes") saw_yes = true;
        if (tok == "no") saw_no = true;
    }
    if (saw_yes == saw_no) return std::nullopt;
    return saw_yes ? EdgeAnswer::yes : EdgeAnswer::no;
}

/// Accepts a single option letter a-e, bare or wrapped ("(b)", "b.",
/// "Answer: b"). Multi-letter words never match, so "maybe" is not a "b".
inline std::optional<TriangleAnswer> parse_triangle_response(const std::string& raw) {
    std::optional<TriangleAnswer> found;
    for (const auto& tok : detail::answer_tokens(raw)) {
        if (tok.size() != 1 || tok[0] < 'a' || tok[0] > 'e') continue;
        const auto opt = static_cast<TriangleAnswer>(tok[0] - 'a');
        if (found && *found != opt) return std::nullopt;
        found = opt;
    }
    return found;
}

/// Mode-dispatched canonical form: "Yes"/"No" for edges, "a".."e" for
/// triangles; empty optional when unparseable or ambiguous.
inline std::optional<std::string> parse_response(const std::string& raw, QueryMode mode) {
    if (mode == QueryMode::edge) {
        const auto a = parse_edge_response(raw);
        if (!a) return std::nullopt;
        return *a == EdgeAnswer::yes ? "Yes" : "No";
    }
    const auto a = parse_triangle_response(raw);
    if (!a) return std::nullopt;
    return std::string(1, static_cast<char>('a' + static_cast<int>(*a)));
}

// ---------------------------------------------------------------------------
// Constraints

enum class Relation { must_link, cannot_link };

struct Constraint {
    int a = 0;  // a < b, corpus ids
    int b = 0;
    Relation rel = Relation::must_link;
    std::string source;
};

/// Pairwise constraints with first-wins dedup. A later insert of the same
/// pair under the opposite relation is dropped and counted as a conflict.
class ConstraintSet {
public:
    /// Returns true when the pair was newly added.
    bool add(int a, int b, Relation rel, const std::string& source) {
        if (a == b) throw ValidationError("constraint endpoints must differ");
        if (a > b) std::swap(a, b);
        const auto [it, fresh] = index_.emplace(key(a, b), rel);
        if (!fresh) {
            if (it->second != rel) ++conflicts_;
            return false;
        }
        items_.push_back(Constraint{a, b, rel, source});
        return true;
    }

    std::optional<Relation> relation(int a, int b) const {
        if (a > b) std::swap(a, b);
        const auto it = index_.find(key(a, b));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    const std::vector<Constraint>& items() const { return items_; }
    int conflicts() const { return conflicts_; }
    std::size_t size() const { return items_.size(); }

    std::size_t must_count() const { return count(Relation::must_link); }
    std::size_t cannot_count() const { return count(Relation::cannot_link); }

    std::vector<std::pair<int, int>> pairs(Relation rel) const {
        std::vector<std::pair<int, int>> out;
        for (const auto& c : items_)
            if (c.rel == rel) out.emplace_back(c.a, c.b);
        return out;
    }

private:
    static std::int64_t key(int a, int b) {
        return (static_cast<std::int64_t>(a) << 32) | static_cast<std::uint32_t>(b);
    }

    std::size_t count(Relation rel) const {
        std::size_t n = 0;
        for (const auto& c : items_) n += c.rel == rel;
        return n;
    }

    std::vector<Constraint> items_;
    std::unordered_map<std::int64_t, Relation> index_;
    int conflicts_ = 0;
};

inline void write_constraints(const std::string& path, const ConstraintSet& set) {
    JsonlWriter out(path);
    for (const auto& c : set.items()) {
        out.write(json{{"a", c.a},
                       {"b", c.b},
                       {"rel", c.rel == Relation::must_link ? "ML" : "CL"},
                       {"source", c.source}});
    }
    out.close();
}

inline ConstraintSet read_constraints(const std::string& path) {
    ConstraintSet set;
    for_each_jsonl(path, [&](std::size_t lineno, const json& j) {
        const std::string where = path + ":" + std::to_string(lineno);
        if (!j.is_object() || !j.contains("a") || !j.contains("b") || !j.contains("rel") ||
            !j["a"].is_number_integer() || !j["b"].is_number_integer() || !j["rel"].is_string())
            throw ValidationError(where + ": expected fields \"a\", \"b\", \"rel\"");
        const std::string rel = j["rel"].get<std::string>();
        if (rel != "ML" && rel != "CL")
            throw ValidationError(where + ": \"rel\" must be \"ML\" or \"CL\"");
        const std::string source =
            j.contains("source") && j["source"].is_string() ? j["source"].get<std::string>() : "";
        set.add(j["a"].get<int>(), j["b"].get<int>(),
                rel == "ML" ? Relation::must_link : Relation::cannot_link, source);
    });
    return set;
}

// ---------------------------------------------------------------------------
// Backends

class OracleBackend {
public:
    virtual ~OracleBackend() = default;
    virtual std::string kind() const = 0;
    virtual std::string model() const { return ""; }
    virtual double temperature() const { return 0.0; }
    /// Raw response text. Throws TransportError on delivery failure.
    virtual std::string answer(const OracleQuery& query) = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline double unit_double(std::uint64_t h) {
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// Answers from ground-truth labels, optionally corrupted: with probability
/// noise_rate an edge answer is flipped and a triangle answer is replaced by
/// a uniformly random different option. The corruption draw depends only on
/// (seed, ids), so replaying any query order reproduces identical answers.
class MockOracle : public OracleBackend {
public:
    MockOracle(const Corpus& corpus, double noise_rate = 0.0, std::uint64_t seed = 0)
        : noise_(noise_rate), seed_(seed) {
        if (!corpus.has_labels())
            throw ValidationError("mock oracle requires ground-truth labels on every instance");
        if (noise_rate < 0.0 || noise_rate > 1.0)
            throw ValidationError("noise rate must lie in [0, 1]");
        labels_ = corpus.label_ids();
    }

    std::string kind() const override { return "mock"; }
    std::string model() const override { return "ground-truth"; }

    std::string answer(const OracleQuery& q) override {
        check_id(q.a);
        check_id(q.b);
        std::uint64_t h = detail::splitmix64(seed_ ^ (q.mode == QueryMode::edge ? 0x45ULL : 0x54ULL));
        h = detail::splitmix64(h ^ static_cast<std::uint64_t>(q.a));
        h = detail::splitmix64(h ^ static_cast<std::uint64_t>(q.b));
        if (q.mode == QueryMode::edge) {
            bool same = labels_[static_cast<std::size_t>(q.a)] == labels_[static_cast<std::size_t>(q.b)];
            if (noise_ > 0.0 && detail::unit_double(detail::splitmix64(h)) < noise_) same = !same;
            return same ? "Yes" : "No";
        }
        check_id(q.c);
        h = detail::splitmix64(h ^ static_cast<std::uint64_t>(q.c));
        int truth = truthful_option(q.a, q.b, q.c);
        if (noise_ > 0.0 && detail::unit_double(detail::splitmix64(h)) < noise_) {
            const int shift = 1 + static_cast<int>(detail::splitmix64(h ^ 0x5eedULL) % 4);
            truth = (truth + shift) % 5;
        }
        return std::string(1, static_cast<char>('a' + truth));
    }

private:
    void check_id(int id) const {
        if (id < 0 || id >= static_cast<int>(labels_.size()))
            throw ValidationError("query id out of corpus range: " + std::to_string(id));
    }

    int truthful_option(int a, int b, int c) const {
        const int la = labels_[static_cast<std::size_t>(a)];
        const int lb = labels_[static_cast<std::size_t>(b)];
        const int lc = labels_[static_cast<std::size_t>(c)];
        const bool ab = la == lb, ac = la == lc, bc = lb == lc;
        if (ab && ac && bc) return 0;
        if (ab) return 1;
        if (ac) return 2;
        if (bc) return 3;
        return 4;
    }

    std::vector<int> labels_;
    double noise_;
    std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Cache

inline std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw NumericalError("SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

inline std::string cache_key(const std::string& backend_kind, const std::string& model,
                             double temperature, const std::string& prompt) {
    const std::string sep(1, '\x1f');
    return sha256_hex(backend_kind + sep + model + sep + json(temperature).dump() + sep + prompt);
}

/// Append-only JSON-lines store of answered prompts. Entries carry a hash of
/// (backend kind, model, temperature, prompt bytes) plus the verbatim prompt,
/// so a run can both dedup exact re-asks and be replayed later.
class QueryCache {
public:
    explicit QueryCache(const std::string& path) : path_(path) {
        std::ifstream probe(path);
        if (probe.good()) {
            probe.close();
            for_each_jsonl(path, [&](std::size_t lineno, const json& j) {
                const std::string where = path + ":" + std::to_string(lineno);
                if (!j.is_object() || !j.contains("key") || !j.contains("prompt") ||
                    !j.contains("answer"))
                    throw ValidationError(where + ": expected fields \"key\", \"prompt\", \"answer\"");
                index(j["key"].get<std::string>(), j["prompt"].get<std::string>(),
                      j["answer"].get<std::string>());
            });
        }
        appender_.open(path, std::ios::app);
        if (!appender_) throw ValidationError("cannot open cache for appending: " + path);
    }

    std::optional<std::string> find_by_key(const std::string& key) {
        std::lock_guard<std::mutex> lock(mu_);
        const auto it = by_key_.find(key);
        if (it == by_key_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<std::string> find_by_prompt(const std::string& prompt) {
        std::lock_guard<std::mutex> lock(mu_);
        const auto it = by_prompt_.find(prompt);
        if (it == by_prompt_.end()) return std::nullopt;
        return it->second;
    }

    void put(const std::string& key, const std::string& prompt, const std::string& answer) {
        std::lock_guard<std::mutex> lock(mu_);
        if (by_key_.count(key)) return;
        appender_ << json{{"key", key}, {"prompt", prompt}, {"answer", answer}}.dump() << "\n";
        appender_.flush();
        if (appender_.fail()) throw TransportError("cache append failed: " + path_);
        index(key, prompt, answer);
    }

    std::size_t size() const { return by_key_.size(); }

private:
    void index(const std::string& key, const std::string& prompt, const std::string& answer) {
        by_key_.emplace(key, answer);
        by_prompt_.emplace(prompt, answer);
    }

    std::string path_;
    std::unordered_map<std::string, std::string> by_key_;
    std::unordered_map<std::string, std::string> by_prompt_;
    std::ofstream appender_;
    std::mutex mu_;
};

/// Wraps any backend with read-through caching keyed by the backend's own
/// (kind, model, temperature) and the prompt bytes. A fully warmed cache
/// answers every query without touching the inner backend.
class CachingBackend : public OracleBackend {
public:
    CachingBackend(std::shared_ptr<OracleBackend> inner, std::shared_ptr<QueryCache> cache)
        : inner_(std::move(inner)), cache_(std::move(cache)) {}

    std::string kind() const override { return inner_->kind(); }
    std::string model() const override { return inner_->model(); }
    double temperature() const override { return inner_->temperature(); }

    std::string answer(const OracleQuery& q) override {
        const std::string key = cache_key(inner_->kind(), inner_->model(), inner_->temperature(), q.prompt);
        if (auto hit = cache_->find_by_key(key)) return *hit;
        const std::string ans = inner_->answer(q);
        cache_->put(key, q.prompt, ans);
        return ans;
    }

private:
    std::shared_ptr<OracleBackend> inner_;
    std::shared_ptr<QueryCache> cache_;
};

/// Pure replay from a previously recorded cache: looks answers up by exact
/// prompt bytes and never issues an outbound call. A miss is a transport
/// error (the recorded run did not cover this query).
class CacheReplayBackend : public OracleBackend {
public:
    explicit CacheReplayBackend(std::shared_ptr<QueryCache> cache) : cache_(std::move(cache)) {}

    std::string kind() const override { return "cached"; }

    std::string answer(const OracleQuery& q) override {
        if (auto hit = cache_->find_by_prompt(q.prompt)) return *hit;
        throw TransportError("cache miss for query (" + std::to_string(q.a) + "," +
                             std::to_string(q.b) +
                             (q.mode == QueryMode::triangle ? "," + std::to_string(q.c) : "") + ")");
    }

private:
    std::shared_ptr<QueryCache> cache_;
};

// ---------------------------------------------------------------------------
// Query runners

struct QueryRunOptions {
    int retries = 2;      // extra attempts after the first failure
    int parallelism = 1;  // worker threads issuing queries
};

struct QueryRunReport {
    std::int64_t queries = 0;
    std::int64_t answered = 0;
    std::int64_t skipped = 0;             // no usable answer after retries
    std::int64_t parse_failures = 0;      // per attempt
    std::int64_t transport_failures = 0;  // per attempt
    std::int64_t prompt_tokens = 0;       // whitespace tokens actually sent
    std::int64_t text_tokens = 0;         // instance tokens covered by the queries
};

namespace detail {

/// Issues prompts across opts.parallelism workers, retrying each query up to
/// opts.retries extra times on transport or parse failure. Results land in a
/// slot per query, so downstream assembly is order-deterministic.
template <typename Parse>
auto dispatch_queries(const std::vector<OracleQuery>& queries, OracleBackend& backend,
                      const QueryRunOptions& opts, QueryRunReport& report, Parse parse)
    -> std::vector<decltype(parse(std::string{}))> {
    using Slot = decltype(parse(std::string{}));
    std::vector<Slot> results(queries.size());
    std::atomic<std::size_t> next{0};
    std::atomic<std::int64_t> parse_failures{0}, transport_failures{0}, prompt_tokens{0};
    std::mutex error_mu;
    std::exception_ptr fatal;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= queries.size()) return;
            {
                std::lock_guard<std::mutex> lock(error_mu);
                if (fatal) return;
            }
            const OracleQuery& q = queries[i];
            const std::int64_t cost = whitespace_token_count(q.prompt);
            for (int attempt = 0; attempt <= opts.retries; ++attempt) {
                std::string raw;
                try {
                    prompt_tokens.fetch_add(cost);
                    raw = backend.answer(q);
                } catch (const TransportError&) {
                    transport_failures.fetch_add(1);
                    continue;
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!fatal) fatal = std::current_exception();
                    return;
                }
                const auto parsed = parse(raw);
                if (parsed) {
                    results[i] = parsed;
                    break;
                }
                parse_failures.fetch_add(1);
            }
        }
    };

    const int workers = std::max(1, std::min<int>(opts.parallelism,
                                                  static_cast<int>(queries.size())));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (fatal) std::rethrow_exception(fatal);

    report.queries += static_cast<std::int64_t>(queries.size());
    report.parse_failures += parse_failures.load();
    report.transport_failures += transport_failures.load();
    report.prompt_tokens += prompt_tokens.load();
    return results;
}

}  // namespace detail

struct QueryRunResult {
    ConstraintSet constraints;
    QueryRunReport report;
};

/// Asks the oracle about each selected pair in order and folds Yes/No answers
/// into must-link/cannot-link constraints.
inline QueryRunResult run_edge_queries(const Corpus& corpus,
                                       const std::vector<std::pair<int, int>>& pairs,
                                       const PromptTemplate& tmpl, OracleBackend& backend,
                                       const QueryRunOptions& opts = {}) {
    const int n = corpus.size();
    std::vector<OracleQuery> queries;
    queries.reserve(pairs.size());
    QueryRunResult out;
    for (const auto& [a, b] : pairs) {
        if (a < 0 || a >= n || b < 0 || b >= n || a == b)
            throw ValidationError("selected pair (" + std::to_string(a) + "," +
                                  std::to_string(b) + ") is out of corpus range");
        OracleQuery q;
        q.mode = QueryMode::edge;
        q.a = a;
        q.b = b;
        q.prompt = build_edge_prompt(corpus.instances[static_cast<std::size_t>(a)],
                                     corpus.instances[static_cast<std::size_t>(b)], tmpl);
        out.report.text_tokens += corpus.instances[static_cast<std::size_t>(a)].token_count +
                                  corpus.instances[static_cast<std::size_t>(b)].token_count;
        queries.push_back(std::move(q));
    }

    const auto answers = detail::dispatch_queries(queries, backend, opts, out.report,
                                                  parse_edge_response);
    // Source names the query kind, not the transport, so replaying a recorded
    // run from the cache reproduces the same bytes.
    const std::string source = backend.kind() == "mock" ? "mock" : "edge-query";
    for (std::size_t i = 0; i < answers.size(); ++i) {
        if (!answers[i]) {
            ++out.report.skipped;
            continue;
        }
        ++out.report.answered;
        out.constraints.add(queries[i].a, queries[i].b,
                            *answers[i] == EdgeAnswer::yes ? Relation::must_link
                                                           : Relation::cannot_link,
                            source);
    }
    return out;
}

/// Asks the oracle about each selected triplet and expands each multiple
/// choice answer into the three pairwise constraints it encodes: (a) all
/// must-link; (b)/(c)/(d) one must-link and two cannot-links; (e) all
/// cannot-link.
inline QueryRunResult run_triangle_queries(const Corpus& corpus,
                                           const std::vector<std::array<int, 3>>& triples,
                                           const PromptTemplate& tmpl, OracleBackend& backend,
                                           const QueryRunOptions& opts = {}) {
    const int n = corpus.size();
    std::vector<OracleQuery> queries;
    queries.reserve(triples.size());
    QueryRunResult out;
    for (const auto& t : triples) {
        if (t[0] < 0 || t[0] >= n || t[1] < 0 || t[1] >= n || t[2] < 0 || t[2] >= n ||
            t[0] == t[1] || t[0] == t[2] || t[1] == t[2])
            throw ValidationError("selected triple (" + std::to_string(t[0]) + "," +
                                  std::to_string(t[1]) + "," + std::to_string(t[2]) +
                                  ") is out of corpus range");
        OracleQuery q;
        q.mode = QueryMode::triangle;
        q.a = t[0];
        q.b = t[1];
        q.c = t[2];
        q.prompt = build_triangle_prompt(corpus.instances[static_cast<std::size_t>(t[0])],
                                         corpus.instances[static_cast<std::size_t>(t[1])],
                                         corpus.instances[static_cast<std::size_t>(t[2])], tmpl);
        out.report.text_tokens += corpus.instances[static_cast<std::size_t>(t[0])].token_count +
                                  corpus.instances[static_cast<std::size_t>(t[1])].token_count +
                                  corpus.instances[static_cast<std::size_t>(t[2])].token_count;
        queries.push_back(std::move(q));
    }

    const auto answers = detail::dispatch_queries(queries, backend, opts, out.report,
                                                  parse_triangle_response);
    const std::string source = backend.kind() == "mock" ? "mock" : "triangle-query";
    const auto ML = Relation::must_link, CL = Relation::cannot_link;
    for (std::size_t i = 0; i < answers.size(); ++i) {
        if (!answers[i]) {
            ++out.report.skipped;
            continue;
        }
        ++out.report.answered;
        const int a = queries[i].a, b = queries[i].b, c = queries[i].c;
        switch (*answers[i]) {
            case TriangleAnswer::a:
                out.constraints.add(a, b, ML, source);
                out.constraints.add(a, c, ML, source);
                out.constraints.add(b, c, ML, source);
                break;
            case TriangleAnswer::b:
                out.constraints.add(a, b, ML, source);
                out.constraints.add(a, c, CL, source);
                out.constraints.add(b, c, CL, source);
                break;
            case TriangleAnswer::c:
                out.constraints.add(a, c, ML, source);
                out.constraints.add(a, b, CL, source);
                out.constraints.add(b, c, CL, source);
                break;
            case TriangleAnswer::d:
                out.constraints.add(b, c, ML, source);
                out.constraints.add(a, b, CL, source);
                out.constraints.add(a, c, CL, source);
                break;
            case TriangleAnswer::e:
                out.constraints.add(a, b, CL, source);
                out.constraints.add(a, c, CL, source);
                out.constraints.add(b, c, CL, source);
                break;
        }
    }
    return out;
}

}  // namespace cequel
