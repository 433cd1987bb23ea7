#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "cequel/errors.hpp"

namespace cequel {

namespace detail {

inline void check_label_vectors(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.empty() || pred.size() != truth.size())
        throw ValidationError("label vectors must be non-empty and equally sized");
    for (int v : pred)
        if (v < 0) throw ValidationError("negative predicted label");
    for (int v : truth)
        if (v < 0) throw ValidationError("negative ground-truth label");
}

/// Joint count table: rows predicted clusters, columns true classes.
inline std::vector<std::vector<std::int64_t>> contingency(const std::vector<int>& pred,
                                                          const std::vector<int>& truth) {
    const int kp = 1 + *std::max_element(pred.begin(), pred.end());
    const int kt = 1 + *std::max_element(truth.begin(), truth.end());
    std::vector<std::vector<std::int64_t>> table(static_cast<std::size_t>(kp),
                                                 std::vector<std::int64_t>(static_cast<std::size_t>(kt), 0));
    for (std::size_t i = 0; i < pred.size(); ++i)
        ++table[static_cast<std::size_t>(pred[i])][static_cast<std::size_t>(truth[i])];
    return table;
}

/// Minimum-cost perfect matching on a square cost matrix (potentials method).
/// Returns the column assigned to each row.
inline std::vector<int> min_cost_assignment(const std::vector<std::vector<double>>& cost) {
    const int m = static_cast<int>(cost.size());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(m) + 1, 0.0), v(static_cast<std::size_t>(m) + 1, 0.0);
    std::vector<int> p(static_cast<std::size_t>(m) + 1, 0), way(static_cast<std::size_t>(m) + 1, 0);
    for (int i = 1; i <= m; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(m) + 1, inf);
        std::vector<char> used(static_cast<std::size_t>(m) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost[static_cast<std::size_t>(i0 - 1)][static_cast<std::size_t>(j - 1)] -
                                   u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(static_cast<std::size_t>(m), -1);
    for (int j = 1; j <= m; ++j)
        if (p[static_cast<std::size_t>(j)] != 0) row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    return row_to_col;
}

}  // namespace detail

/// Clustering accuracy: the best one-to-one relabeling of predicted clusters
/// onto true classes, scored as the fraction of points matched.
inline double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
    detail::check_label_vectors(pred, truth);
    const auto table = detail::contingency(pred, truth);
    const std::size_t kp = table.size(), kt = table.front().size();
    const std::size_t m = std::max(kp, kt);
    std::vector<std::vector<double>> cost(m, std::vector<double>(m, 0.0));
    for (std::size_t r = 0; r < kp; ++r)
        for (std::size_t c = 0; c < kt; ++c)
            cost[r][c] = -static_cast<double>(table[r][c]);
    const auto match = detail::min_cost_assignment(cost);
    std::int64_t agreed = 0;
    for (std::size_t r = 0; r < kp; ++r)
        if (match[r] >= 0 && static_cast<std::size_t>(match[r]) < kt)
            agreed += table[r][static_cast<std::size_t>(match[r])];
    return static_cast<double>(agreed) / static_cast<double>(pred.size());
}

/// Normalized mutual information with natural logarithms and arithmetic-mean
/// normalization: NMI = 2 MI / (H_pred + H_truth). Two single-cluster inputs
/// agree perfectly and score 1.
inline double nmi(const std::vector<int>& pred, const std::vector<int>& truth) {
    detail::check_label_vectors(pred, truth);
    const auto table = detail::contingency(pred, truth);
    const std::size_t kp = table.size(), kt = table.front().size();
    const double n = static_cast<double>(pred.size());

    std::vector<double> row(kp, 0.0), col(kt, 0.0);
    for (std::size_t r = 0; r < kp; ++r)
        for (std::size_t c = 0; c < kt; ++c) {
            row[r] += static_cast<double>(table[r][c]);
            col[c] += static_cast<double>(table[r][c]);
        }

    double hp = 0.0, ht = 0.0, mi = 0.0;
    for (std::size_t r = 0; r < kp; ++r)
        if (row[r] > 0.0) hp -= row[r] / n * std::log(row[r] / n);
    for (std::size_t c = 0; c < kt; ++c)
        if (col[c] > 0.0) ht -= col[c] / n * std::log(col[c] / n);
    for (std::size_t r = 0; r < kp; ++r)
        for (std::size_t c = 0; c < kt; ++c) {
            const double joint = static_cast<double>(table[r][c]);
            if (joint > 0.0)
                mi += joint / n * std::log(joint * n / (row[r] * col[c]));
        }

    if (hp == 0.0 && ht == 0.0) return 1.0;
    const double denom = (hp + ht) / 2.0;
    return denom > 0.0 ? mi / denom : 0.0;
}

struct MetricReport {
    double acc = 0.0;
    double nmi = 0.0;
};

inline MetricReport evaluate(const std::vector<int>& pred, const std::vector<int>& truth) {
    return MetricReport{accuracy(pred, truth), nmi(pred, truth)};
}

}  // namespace cequel
