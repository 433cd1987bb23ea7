#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "cequel/errors.hpp"
#include "cequel/index_heap.hpp"
#include "cequel/triangle_select.hpp"
#include "support.hpp"

using namespace cequel;
using testsupport::TempDir;

namespace {

Eigen::MatrixXd random_unit_rows(int n, int d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd m(n, d);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) m(i, j) = gauss(rng);
        m.row(i).normalize();
    }
    return m;
}

}  // namespace

TEST_CASE("compressed heap drops contiguous prefixes but keeps its last element") {
    SECTION("gap closure cascades through the whole run") {
        CompressedIndexHeap h(4);
        h.add({6, 7});
        CHECK(h.min() == 4);
        CHECK(h.size() == 3);
        h.add({5});
        CHECK(h.min() == 7);
        CHECK(h.max() == 7);
        CHECK(h.size() == 1);
    }

    SECTION("inserts that do not close the gap never compress") {
        CompressedIndexHeap h(2);
        h.add({4});
        h.add({7});
        CHECK(h.min() == 2);
        CHECK(h.size() == 3);
        CHECK(h.contains(4));
        CHECK(h.contains(7));
    }

    SECTION("cascade stops at the first hole") {
        CompressedIndexHeap h(2);
        h.add({5});
        h.add({3});
        CHECK(h.min() == 3);
        CHECK(h.size() == 2);
        CHECK(h.contains(5));
        // 2 was dropped from the heap during compression but stays occupied.
        CHECK(h.contains(2));
        CHECK_FALSE(h.contains(4));
        // Re-adding an index inside the occupied run is a no-op.
        h.add({2});
        CHECK(h.min() == 3);
        CHECK(h.size() == 2);
    }

    SECTION("batch insert compresses across the batch") {
        CompressedIndexHeap h(2);
        h.add({3, 4});
        CHECK(h.min() == 4);
        CHECK(h.size() == 1);
    }

    SECTION("duplicates are ignored") {
        CompressedIndexHeap h(3);
        h.add({5});
        h.add({5});
        CHECK(h.min() == 3);
        CHECK(h.size() == 2);
        // A duplicate equal to min+1 must not trigger compression either.
        CompressedIndexHeap g(3);
        g.add({4});          // compresses to {4}
        CHECK(g.min() == 4);
        g.add({4});
        CHECK(g.min() == 4);
        CHECK(g.size() == 1);
    }

    SECTION("max tracks the largest ever inserted") {
        CompressedIndexHeap h(1);
        h.add({9, 2});
        CHECK(h.max() == 9);
        CHECK(h.min() == 2);
    }
}

TEST_CASE("compressed heap matches a plain set above the contiguous prefix") {
    std::mt19937_64 rng(2026);
    for (int trial = 0; trial < 100; ++trial) {
        const int base = 1 + static_cast<int>(rng() % 5);
        CompressedIndexHeap heap(base);
        std::set<int> shadow{base};
        for (int step = 0; step < 60; ++step) {
            const int count = 1 + static_cast<int>(rng() % 3);
            std::vector<int> batch;
            for (int i = 0; i < count; ++i)
                batch.push_back(base + static_cast<int>(rng() % 30));
            heap.add(batch.begin(), batch.end());
            shadow.insert(batch.begin(), batch.end());

            int run_end = base;
            while (shadow.count(run_end + 1)) ++run_end;
            REQUIRE(heap.min() == run_end);
            REQUIRE(heap.max() == *shadow.rbegin());
            for (int v = run_end; v <= base + 31; ++v)
                REQUIRE(heap.contains(v) == (shadow.count(v) != 0));
        }
    }
}

TEST_CASE("greedy_scan finds the smallest admissible third index") {
    CompressedIndexHeap h7(7);
    CompressedIndexHeap h4(4);
    CHECK(greedy_scan(h7, h4, 9) == 5);

    CompressedIndexHeap hx(2);
    hx.add({5});
    CHECK(greedy_scan(hx, h4, 9) == 6);  // 5 occupied in hx

    CompressedIndexHeap busy(3);
    busy.add({5, 7});
    CompressedIndexHeap other(4);
    other.add({6});
    CHECK_FALSE(greedy_scan(busy, other, 7).has_value());  // 5,6,7 all blocked
    CHECK(greedy_scan(busy, other, 8) == 8);

    CompressedIndexHeap empty_row(9);
    CHECK_FALSE(greedy_scan(empty_row, h4, 4).has_value());  // first probe over limit
}

TEST_CASE("triangle scores and budgets") {
    auto deg = compute_degrees(testsupport::worked_corpus().embeddings);
    CHECK(stc(deg, 0, 1, 2) == Catch::Approx(1.5972222222222222).epsilon(1e-14));

    const double s = 15516.0 / 2225.0;
    CHECK(triangle_budget(15516.0, s, 2225) == 741);
    CHECK(triangle_budget(0.0, s, 2225) == 0);
    CHECK(triangle_budget(1e9, 1.0, 6) == 5);  // capped at n(n-1)/6
    CHECK_THROWS_AS(triangle_budget(10.0, 0.0, 5), ValidationError);
    CHECK_THROWS_AS(triangle_budget(-1.0, 2.0, 5), ValidationError);
}

TEST_CASE("six-instance walk produces the expected triangles and heap states") {
    // Any six instances with distinct degrees give this rank-space walk.
    auto deg = compute_degrees(random_unit_rows(6, 3, 2));
    std::set<double> distinct(deg.degrees.begin(), deg.degrees.end());
    REQUIRE(distinct.size() == 6);

    auto sel = select_triangles(deg, 2);
    REQUIRE(sel.triangles.size() == 2);
    CHECK(sel.triangles[0] == Triangle{1, 2, 3});
    CHECK(sel.triangles[1] == Triangle{1, 4, 5});
    CHECK(sel.heaps[1].min() == 5);
    CHECK(sel.heaps[2].min() == 3);
    CHECK(sel.heaps[3].min() == 3);
    CHECK(sel.heaps[4].min() == 5);
    CHECK(sel.heaps[5].min() == 5);
    CHECK(sel.heaps[6].min() == 6);
    CHECK_FALSE(sel.exhausted);

    auto sel3 = select_triangles(deg, 3);
    REQUIRE(sel3.triangles.size() == 3);
    CHECK(sel3.triangles[2] == Triangle{2, 4, 6});
}

TEST_CASE("triangle selection rejects impossible inputs") {
    auto deg = compute_degrees(random_unit_rows(6, 3, 4));
    CHECK_THROWS_AS(select_triangles(deg, -1), ValidationError);
    CHECK_THROWS_AS(select_triangles(deg, 6), ValidationError);  // cap is 5
    auto two = compute_degrees(random_unit_rows(2, 3, 4));
    CHECK_THROWS_AS(select_triangles(two, 1), ValidationError);
}

TEST_CASE("random triangle selections satisfy the structural invariants") {
    auto deg = compute_degrees(random_unit_rows(60, 8, 99));
    TriangleSelectOptions opts;
    opts.trace = true;
    const std::int64_t budget = 500;
    auto sel = select_triangles(deg, budget, opts);

    REQUIRE((static_cast<std::int64_t>(sel.triangles.size()) == budget || sel.exhausted));
    REQUIRE_FALSE(sel.triangles.empty());
    CHECK(sel.triangles.front() == Triangle{1, 2, 3});

    // Every implied pair is fresh: triangles overlap in at most one rank.
    std::set<std::pair<int, int>> pairs;
    for (const Triangle& t : sel.triangles) {
        CHECK(t.a < t.b);
        CHECK(t.b < t.c);
        CHECK(t.c <= 60);
        CHECK(pairs.insert({t.a, t.b}).second);
        CHECK(pairs.insert({t.a, t.c}).second);
        CHECK(pairs.insert({t.b, t.c}).second);
    }
    CHECK(pairs.size() == 3 * sel.triangles.size());

    // Each step picked the argmax of its candidate set.
    auto score = [&](const Triangle& t) {
        return 1.0 / deg.degrees(sel.id_of_rank(t.a)) + 1.0 / deg.degrees(sel.id_of_rank(t.b)) +
               1.0 / deg.degrees(sel.id_of_rank(t.c));
    };
    REQUIRE(sel.trace.size() == sel.triangles.size() - 1 + (sel.exhausted ? 1 : 0));
    for (std::size_t i = 0; i + (sel.exhausted ? 1 : 0) < sel.trace.size(); ++i) {
        const Triangle& picked = sel.triangles[i + 1];
        bool found = false;
        for (const Triangle& c : sel.trace[i]) {
            if (c == picked) found = true;
            CHECK(score(c) <= score(picked) + 1e-15);
        }
        CHECK(found);
    }
    CHECK(sel.max_heap_size >= 1);

    auto again = select_triangles(deg, budget);
    CHECK(again.triangles == sel.triangles);
}

TEST_CASE("triangle selections round-trip through jsonl") {
    TempDir dir;
    auto deg = compute_degrees(random_unit_rows(30, 4, 5));
    auto sel = select_triangles(deg, 40);
    auto path = dir.file("triangles.jsonl");
    write_triangle_selection(path, sel);
    auto triples = read_triangle_selection(path);
    CHECK(triples == sel.id_triples());

    std::ofstream(path) << "{\"a\":1,\"b\":2}\n";
    CHECK_THROWS_AS(read_triangle_selection(path), ValidationError);
}
