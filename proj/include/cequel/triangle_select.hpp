#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "cequel/corpus.hpp"
#include "cequel/errors.hpp"
#include "cequel/index_heap.hpp"
#include "cequel/jsonl.hpp"

namespace cequel {

/// Spanning-triangle score of instances a, b, c (corpus ids).
inline double stc(const DegreeProfile& deg, int a, int b, int c) {
    return 1.0 / deg.degrees(a) + 1.0 / deg.degrees(b) + 1.0 / deg.degrees(c);
}

/// Number of triplet queries affordable under a token budget Q with mean
/// instance length s: floor(Q / (3s)). Capped so the selected triangles can
/// still have pairwise-disjoint edges (three fresh pairs each).
inline std::int64_t triangle_budget(double q_tokens, double mean_tokens, std::int64_t n) {
    if (!(mean_tokens > 0.0)) throw ValidationError("mean token count must be positive");
    if (q_tokens < 0.0) throw ValidationError("token budget must be non-negative");
    if (n < 0) throw ValidationError("corpus size must be non-negative");
    const long double ratio = static_cast<long double>(q_tokens) /
                              (3.0L * static_cast<long double>(mean_tokens));
    auto budget = static_cast<std::int64_t>(std::floor(ratio + 1e-9L));
    const std::int64_t cap = n * (n - 1) / 6;
    return std::min(budget, cap);
}

/// A triangle in rank space: 1-based positions in the degree-ascending
/// ordering, with a < b < c.
struct Triangle {
    int a = 0;
    int b = 0;
    int c = 0;
    bool operator==(const Triangle&) const = default;
};

struct TriangleSelectOptions {
    bool trace = false;  // record each step's candidate set (for audits)
};

struct TriangleSelection {
    std::vector<Triangle> triangles;           // rank space, selection order
    std::vector<double> stcs;                  // score of each selected triangle
    std::vector<int> rank_to_id;               // rank r (1-based) -> corpus id
    std::vector<CompressedIndexHeap> heaps;    // heaps[r] tracks row r; [0] unused
    bool exhausted = false;
    std::size_t max_heap_size = 0;
    std::vector<std::vector<Triangle>> trace;  // candidate sets per step

    int id_of_rank(int r) const { return rank_to_id[static_cast<std::size_t>(r) - 1]; }

    std::vector<std::array<int, 3>> id_triples() const {
        std::vector<std::array<int, 3>> out;
        out.reserve(triangles.size());
        for (const Triangle& t : triangles)
            out.push_back({id_of_rank(t.a), id_of_rank(t.b), id_of_rank(t.c)});
        return out;
    }
};

/// Ranks instances by ascending degree and grows the selection one triangle
/// at a time. Row heaps remember which columns each row has touched; a
/// candidate in row r pairs the row's frontier column b with the smallest
/// third index admissible for both rows. Only rows adjacent to the last pick
/// (a-1, a, a+1) are probed, mirroring the edge rule.
inline TriangleSelection select_triangles(const DegreeProfile& deg, std::int64_t budget,
                                          const TriangleSelectOptions& options = {}) {
    const int n = deg.size();
    if (n < 3) throw ValidationError("triangle selection requires at least 3 instances");
    if (budget < 0) throw ValidationError("triangle budget must be non-negative");
    if (budget > static_cast<std::int64_t>(n) * (n - 1) / 6)
        throw ValidationError("triangle budget exceeds the disjoint-pair capacity");

    TriangleSelection sel;
    sel.rank_to_id.resize(static_cast<std::size_t>(n));
    std::iota(sel.rank_to_id.begin(), sel.rank_to_id.end(), 0);
    std::sort(sel.rank_to_id.begin(), sel.rank_to_id.end(), [&](int x, int y) {
        if (deg.degrees(x) != deg.degrees(y)) return deg.degrees(x) < deg.degrees(y);
        return x < y;
    });
    if (budget == 0) return sel;

    std::vector<double> inv(static_cast<std::size_t>(n) + 1);
    for (int r = 1; r <= n; ++r) inv[static_cast<std::size_t>(r)] = 1.0 / deg.degrees(sel.id_of_rank(r));
    auto rank_stc = [&](const Triangle& t) {
        return inv[static_cast<std::size_t>(t.a)] + inv[static_cast<std::size_t>(t.b)] +
               inv[static_cast<std::size_t>(t.c)];
    };

    sel.heaps.resize(static_cast<std::size_t>(n) + 1);
    for (int r = 1; r <= n; ++r) sel.heaps[static_cast<std::size_t>(r)] = CompressedIndexHeap(r);

    auto push = [&](const Triangle& t) {
        sel.triangles.push_back(t);
        sel.stcs.push_back(rank_stc(t));
        sel.heaps[static_cast<std::size_t>(t.a)].add({t.b, t.c});
        sel.heaps[static_cast<std::size_t>(t.b)].add({t.c});
        sel.max_heap_size = std::max({sel.max_heap_size,
                                      sel.heaps[static_cast<std::size_t>(t.a)].size(),
                                      sel.heaps[static_cast<std::size_t>(t.b)].size()});
    };

    push(Triangle{1, 2, 3});
    while (static_cast<std::int64_t>(sel.triangles.size()) < budget) {
        const Triangle last = sel.triangles.back();
        std::vector<Triangle> candidates;
        for (int row : {last.a - 1, last.a, last.a + 1}) {
            if (row < 1 || row > n) continue;
            const auto& hrow = sel.heaps[static_cast<std::size_t>(row)];
            const int b = hrow.min() + 1;
            if (b > n) continue;
            const auto c = greedy_scan(hrow, sel.heaps[static_cast<std::size_t>(b)], n);
            if (!c) continue;
            candidates.push_back(Triangle{row, b, *c});
        }
        if (options.trace) sel.trace.push_back(candidates);
        if (candidates.empty()) {
            sel.exhausted = true;
            break;
        }
        Triangle best = candidates.front();
        for (const Triangle& t : candidates) {
            const double st = rank_stc(t), sb = rank_stc(best);
            const auto tk = std::array{t.a, t.b, t.c}, bk = std::array{best.a, best.b, best.c};
            if (st > sb || (st == sb && tk < bk)) best = t;
        }
        push(best);
    }
    return sel;
}

/// Persists a selection as JSON-lines {"a", "b", "c", "stc"} in corpus ids.
inline void write_triangle_selection(const std::string& path, const TriangleSelection& sel) {
    JsonlWriter out(path);
    for (std::size_t i = 0; i < sel.triangles.size(); ++i) {
        const Triangle& t = sel.triangles[i];
        out.write(json{{"a", sel.id_of_rank(t.a)},
                       {"b", sel.id_of_rank(t.b)},
                       {"c", sel.id_of_rank(t.c)},
                       {"stc", sel.stcs[i]}});
    }
    out.close();
}

inline std::vector<std::array<int, 3>> read_triangle_selection(const std::string& path) {
    std::vector<std::array<int, 3>> triples;
    for_each_jsonl(path, [&](std::size_t lineno, const json& j) {
        const std::string where = path + ":" + std::to_string(lineno);
        if (!j.is_object() || !j.contains("a") || !j.contains("b") || !j.contains("c") ||
            !j["a"].is_number_integer() || !j["b"].is_number_integer() ||
            !j["c"].is_number_integer())
            throw ValidationError(where + ": expected integer fields \"a\", \"b\", \"c\"");
        triples.push_back({j["a"].get<int>(), j["b"].get<int>(), j["c"].get<int>()});
    });
    return triples;
}

}  // namespace cequel
