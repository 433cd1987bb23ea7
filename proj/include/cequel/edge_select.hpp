#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cequel/corpus.hpp"
#include "cequel/errors.hpp"
#include "cequel/jsonl.hpp"

namespace cequel {

/// Spanning-edge score of instances a and b (corpus ids): 1/d(a) + 1/d(b).
inline double sec(const DegreeProfile& deg, int a, int b) {
    return 1.0 / deg.degrees(a) + 1.0 / deg.degrees(b);
}

/// Number of pair queries affordable under a token budget Q when the mean
/// instance length is s tokens: floor(Q / (2s)), capped at the number of
/// distinct pairs. The tiny guard keeps exact integer ratios from landing
/// one ulp below the boundary.
inline std::int64_t edge_budget(double q_tokens, double mean_tokens, std::int64_t n) {
    if (!(mean_tokens > 0.0)) throw ValidationError("mean token count must be positive");
    if (q_tokens < 0.0) throw ValidationError("token budget must be non-negative");
    if (n < 0) throw ValidationError("corpus size must be non-negative");
    const long double ratio = static_cast<long double>(q_tokens) /
                              (2.0L * static_cast<long double>(mean_tokens));
    auto budget = static_cast<std::int64_t>(std::floor(ratio + 1e-9L));
    const std::int64_t cap = n * (n - 1) / 2;
    return std::min(budget, cap);
}

/// An edge in rank space: 1-based positions in the degree-ascending ordering,
/// with a < b.
struct Edge {
    int a = 0;
    int b = 0;
    bool operator==(const Edge&) const = default;
};

struct EdgeSelectOptions {
    bool trace = false;  // record each step's candidate set (for audits)
};

struct EdgeSelection {
    std::vector<Edge> edges;               // rank space, selection order
    std::vector<double> secs;              // score of each selected edge
    std::vector<int> rank_to_id;           // rank r (1-based) -> corpus id
    std::unordered_map<int, int> cursors;  // per-row next column suggestion
    bool exhausted = false;                // ran out of candidates before the budget
    std::vector<std::vector<Edge>> trace;  // candidate sets per step (options.trace)

    int id_of_rank(int r) const { return rank_to_id[static_cast<std::size_t>(r) - 1]; }

    std::vector<std::pair<int, int>> id_pairs() const {
        std::vector<std::pair<int, int>> out;
        out.reserve(edges.size());
        for (const Edge& e : edges) out.emplace_back(id_of_rank(e.a), id_of_rank(e.b));
        return out;
    }
};

/// Smallest r such that r(r+1)/2 >= budget: an upper bound on the first rank
/// of any edge the greedy selection can emit within that budget.
inline int max_first_rank_bound(std::int64_t budget) {
    if (budget <= 0) return 0;
    int r = static_cast<int>((std::sqrt(8.0L * static_cast<long double>(budget) + 1.0L) - 1.0L) / 2.0L);
    r = std::max(r - 2, 1);
    while (static_cast<std::int64_t>(r) * (r + 1) / 2 < budget) ++r;
    return r;
}

/// Ranks instances by ascending degree (ties by id) and grows the selection
/// one edge at a time. Each step considers at most three successors of the
/// last picked edge (a,b): the frontier of row 1, (a, b+1), and the frontier
/// of row a+1; the highest-scoring candidate wins, ties resolved toward the
/// lexicographically smallest rank pair.
inline EdgeSelection select_edges(const DegreeProfile& deg, std::int64_t budget,
                                  const EdgeSelectOptions& options = {}) {
    const int n = deg.size();
    if (n < 2) throw ValidationError("edge selection requires at least 2 instances");
    if (budget < 0) throw ValidationError("edge budget must be non-negative");
    if (budget > static_cast<std::int64_t>(n) * (n - 1) / 2)
        throw ValidationError("edge budget exceeds the number of distinct pairs");

    EdgeSelection sel;
    sel.rank_to_id.resize(static_cast<std::size_t>(n));
    std::iota(sel.rank_to_id.begin(), sel.rank_to_id.end(), 0);
    std::sort(sel.rank_to_id.begin(), sel.rank_to_id.end(), [&](int x, int y) {
        if (deg.degrees(x) != deg.degrees(y)) return deg.degrees(x) < deg.degrees(y);
        return x < y;
    });
    if (budget == 0) return sel;

    std::vector<double> inv(static_cast<std::size_t>(n) + 1);
    for (int r = 1; r <= n; ++r) inv[static_cast<std::size_t>(r)] = 1.0 / deg.degrees(sel.id_of_rank(r));
    auto rank_sec = [&](const Edge& e) {
        return inv[static_cast<std::size_t>(e.a)] + inv[static_cast<std::size_t>(e.b)];
    };
    auto pair_key = [n](const Edge& e) {
        return static_cast<std::int64_t>(e.a) * (n + 1) + e.b;
    };

    std::unordered_set<std::int64_t> taken;
    auto push = [&](const Edge& e) {
        sel.edges.push_back(e);
        sel.secs.push_back(rank_sec(e));
        sel.cursors[e.a] = e.b + 1;
        taken.insert(pair_key(e));
    };
    auto cursor = [&](int row) {
        auto it = sel.cursors.find(row);
        return it == sel.cursors.end() ? row + 1 : it->second;
    };

    push(Edge{1, 2});
    while (static_cast<std::int64_t>(sel.edges.size()) < budget) {
        const Edge last = sel.edges.back();
        const Edge raw[3] = {Edge{1, cursor(1)},
                             Edge{last.a, last.b + 1},
                             Edge{last.a + 1, cursor(last.a + 1)}};
        std::vector<Edge> candidates;
        for (const Edge& e : raw) {
            if (e.b > n || e.a >= e.b) continue;
            if (taken.count(pair_key(e))) continue;
            if (std::find(candidates.begin(), candidates.end(), e) == candidates.end())
                candidates.push_back(e);
        }
        if (options.trace) sel.trace.push_back(candidates);
        if (candidates.empty()) {
            sel.exhausted = true;
            break;
        }
        Edge best = candidates.front();
        for (const Edge& e : candidates) {
            const double se = rank_sec(e), sb = rank_sec(best);
            if (se > sb || (se == sb && (e.a < best.a || (e.a == best.a && e.b < best.b))))
                best = e;
        }
        push(best);
    }
    return sel;
}

/// Persists a selection as JSON-lines {"a", "b", "sec"} in original corpus ids.
inline void write_edge_selection(const std::string& path, const EdgeSelection& sel) {
    JsonlWriter out(path);
    for (std::size_t i = 0; i < sel.edges.size(); ++i) {
        out.write(json{{"a", sel.id_of_rank(sel.edges[i].a)},
                       {"b", sel.id_of_rank(sel.edges[i].b)},
                       {"sec", sel.secs[i]}});
    }
    out.close();
}

inline std::vector<std::pair<int, int>> read_edge_selection(const std::string& path) {
    std::vector<std::pair<int, int>> pairs;
    for_each_jsonl(path, [&](std::size_t lineno, const json& j) {
        const std::string where = path + ":" + std::to_string(lineno);
        if (!j.is_object() || !j.contains("a") || !j.contains("b") ||
            !j["a"].is_number_integer() || !j["b"].is_number_integer())
            throw ValidationError(where + ": expected integer fields \"a\" and \"b\"");
        pairs.emplace_back(j["a"].get<int>(), j["b"].get<int>());
    });
    return pairs;
}

}  // namespace cequel
