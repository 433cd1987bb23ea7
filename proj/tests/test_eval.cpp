#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <set>

#include "cequel/errors.hpp"
#include "cequel/eval.hpp"

using namespace cequel;

namespace {

/// Accuracy by trying every injective mapping of predicted clusters onto
/// truth clusters. Only viable for small cluster counts.
double brute_force_accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
    std::set<int> pc(pred.begin(), pred.end()), tc(truth.begin(), truth.end());
    std::vector<int> ps(pc.begin(), pc.end()), ts(tc.begin(), tc.end());
    const std::size_t slots = std::max(ps.size(), ts.size());
    std::vector<int> perm(slots);
    for (std::size_t i = 0; i < slots; ++i) perm[i] = static_cast<int>(i);
    std::int64_t best = 0;
    do {
        std::int64_t hits = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const auto pi = static_cast<std::size_t>(
                std::find(ps.begin(), ps.end(), pred[i]) - ps.begin());
            const auto slot = static_cast<std::size_t>(perm[pi]);
            if (slot < ts.size() && ts[slot] == truth[i]) ++hits;
        }
        best = std::max(best, hits);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(pred.size());
}

}  // namespace

TEST_CASE("accuracy finds the best cluster matching") {
    CHECK(accuracy({0, 0, 1, 1, 2}, {1, 1, 0, 0, 0}) == Catch::Approx(0.8));
    CHECK(accuracy({0, 0, 0, 0}, {1, 1, 1, 1}) == 1.0);
    CHECK(accuracy({2, 0, 1}, {0, 1, 2}) == 1.0);  // pure relabeling
    CHECK(accuracy({0, 1}, {0, 0}) == Catch::Approx(0.5));
    // More predicted clusters than truth clusters: extras match nothing.
    CHECK(accuracy({0, 1, 2, 3}, {0, 0, 1, 1}) == Catch::Approx(0.5));
}

TEST_CASE("accuracy equals exhaustive matching on random labelings") {
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 5 + static_cast<int>(rng() % 20);
        const int kp = 1 + static_cast<int>(rng() % 5);
        const int kt = 1 + static_cast<int>(rng() % 5);
        std::vector<int> pred(static_cast<std::size_t>(n)), truth(static_cast<std::size_t>(n));
        for (auto& v : pred) v = static_cast<int>(rng() % static_cast<std::uint64_t>(kp));
        for (auto& v : truth) v = static_cast<int>(rng() % static_cast<std::uint64_t>(kt));
        CHECK(accuracy(pred, truth) == Catch::Approx(brute_force_accuracy(pred, truth)));
    }
}

TEST_CASE("accuracy is invariant under label permutations") {
    std::vector<int> pred{0, 1, 2, 2, 1, 0, 2};
    std::vector<int> truth{1, 1, 0, 0, 2, 2, 0};
    const double base = accuracy(pred, truth);
    std::vector<int> map{2, 0, 1};
    std::vector<int> permuted;
    for (int v : pred) permuted.push_back(map[static_cast<std::size_t>(v)]);
    CHECK(accuracy(permuted, truth) == Catch::Approx(base));
}

TEST_CASE("normalized mutual information on frozen cases") {
    CHECK(nmi({0, 0, 1, 1, 1}, {0, 0, 0, 1, 1}) ==
          Catch::Approx(0.4325380677663126).epsilon(1e-12));
    CHECK(nmi({0, 1, 2, 0, 1, 2}, {0, 0, 1, 1, 2, 2}) ==
          Catch::Approx(0.3690702464285425).epsilon(1e-12));
    CHECK(nmi({0, 1, 0, 1}, {0, 0, 1, 1}) == Catch::Approx(0.0).margin(1e-12));
    CHECK(nmi({2, 0, 1}, {0, 1, 2}) == Catch::Approx(1.0));
    // Both partitions trivial: identical by convention.
    CHECK(nmi({0, 0, 0}, {0, 0, 0}) == 1.0);
    // Only one side trivial: no shared information.
    CHECK(nmi({0, 0}, {0, 1}) == 0.0);
    CHECK(nmi({0, 1}, {0, 0}) == 0.0);
}

TEST_CASE("metrics validate their inputs") {
    CHECK_THROWS_AS(accuracy({}, {}), ValidationError);
    CHECK_THROWS_AS(accuracy({0, 1}, {0}), ValidationError);
    CHECK_THROWS_AS(accuracy({0, -1}, {0, 1}), ValidationError);
    CHECK_THROWS_AS(nmi({0, 1}, {0, -2}), ValidationError);

    auto report = evaluate({0, 0, 1, 1, 2}, {1, 1, 0, 0, 0});
    CHECK(report.acc == Catch::Approx(0.8));
    CHECK(report.nmi == Catch::Approx(nmi({0, 0, 1, 1, 2}, {1, 1, 0, 0, 0})));
}
