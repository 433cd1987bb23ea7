#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <lapacke.h>

#include "cequel/corpus.hpp"
#include "cequel/errors.hpp"
#include "cequel/jsonl.hpp"
#include "cequel/weighting.hpp"

namespace cequel {

struct ClusterAssignment {
    std::vector<int> labels;
    Eigen::MatrixXd centroids;            // k-means family only
    int iterations = 0;
    bool converged = false;
    std::vector<double> objective_trace;  // objective after each sweep

    // spectral diagnostics
    bool used_fallback = false;           // constrained solve bypassed or abandoned
    double alpha = 0.0;                   // shift actually used
    std::vector<double> eigenvalues;      // retained generalized eigenvalues
    std::vector<double> eigen_residuals;  // ||L v - lambda R_a v|| per retained pair
};

namespace detail {

/// Per-point view of the signed constraint matrix: (partner, magnitude).
struct ConstraintAdjacency {
    std::vector<std::vector<std::pair<int, double>>> must, cannot;
};

inline ConstraintAdjacency build_adjacency(int n, const WeightedConstraintMatrix& matrix) {
    ConstraintAdjacency adj;
    adj.must.resize(static_cast<std::size_t>(n));
    adj.cannot.resize(static_cast<std::size_t>(n));
    for (const auto& [a, b, w] : matrix.list) {
        if (w > 0.0) {
            adj.must[static_cast<std::size_t>(a)].emplace_back(b, w);
            adj.must[static_cast<std::size_t>(b)].emplace_back(a, w);
        } else if (w < 0.0) {
            adj.cannot[static_cast<std::size_t>(a)].emplace_back(b, -w);
            adj.cannot[static_cast<std::size_t>(b)].emplace_back(a, -w);
        }
    }
    return adj;
}

/// Distance-squared seeding: each next center is sampled proportionally to
/// the squared distance from the chosen set. Sampling uses raw 64-bit draws,
/// so results are identical across platforms.
inline Eigen::MatrixXd seed_centroids(const Eigen::MatrixXd& x, int k, std::mt19937_64& rng) {
    const auto n = x.rows();
    Eigen::MatrixXd centroids(k, x.cols());
    const auto first = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
    centroids.row(0) = x.row(first);
    Eigen::VectorXd d2 = (x.rowwise() - x.row(first)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
        const double total = d2.sum();
        Eigen::Index pick;
        if (total > 0.0) {
            const double target = unit_double(rng()) * total;
            double cum = 0.0;
            pick = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                cum += d2(i);
                if (cum > target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
        }
        centroids.row(c) = x.row(pick);
        d2 = d2.cwiseMin((x.rowwise() - x.row(pick)).rowwise().squaredNorm());
    }
    return centroids;
}

/// Lloyd iterations where each point pays, on top of its squared distance,
/// the weight of every must-link partner currently elsewhere and every
/// cannot-link partner currently in the candidate cluster. Points are swept
/// in ascending id order against the evolving label vector; distance ties
/// keep the lowest cluster id. The total objective (distances plus violated
/// constraint weights) never increases.
inline ClusterAssignment penalized_lloyd(const Eigen::MatrixXd& x, int k,
                                         const ConstraintAdjacency& adj,
                                         const std::vector<std::tuple<int, int, double>>& pairs,
                                         std::uint64_t seed, int max_iters) {
    const auto n = x.rows();
    if (n == 0) throw ValidationError("cannot cluster an empty matrix");
    if (k < 1 || k > n)
        throw ValidationError("cluster count must lie in [1, " + std::to_string(n) + "]");
    if (max_iters < 1) throw ValidationError("iteration cap must be positive");

    std::mt19937_64 rng(seed);
    ClusterAssignment out;
    out.centroids = seed_centroids(x, k, rng);
    out.labels.assign(static_cast<std::size_t>(n), 0);

    const Eigen::VectorXd xsq = x.rowwise().squaredNorm();
    Eigen::MatrixXd d2(n, k);
    auto refresh_d2 = [&] {
        d2.noalias() = -2.0 * x * out.centroids.transpose();
        d2.colwise() += xsq;
        d2.rowwise() += out.centroids.rowwise().squaredNorm().transpose();
    };

    // initial assignment by distance alone; sweeps then see defined labels
    refresh_d2();
    for (Eigen::Index i = 0; i < n; ++i) {
        int best = 0;
        for (int c = 1; c < k; ++c)
            if (d2(i, c) < d2(i, best)) best = c;
        out.labels[static_cast<std::size_t>(i)] = best;
    }

    auto objective = [&] {
        double obj = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            obj += (x.row(i) - out.centroids.row(out.labels[static_cast<std::size_t>(i)]))
                       .squaredNorm();
        for (const auto& [a, b, w] : pairs) {
            const bool together = out.labels[static_cast<std::size_t>(a)] ==
                                  out.labels[static_cast<std::size_t>(b)];
            if (w > 0.0 && !together) obj += w;
            if (w < 0.0 && together) obj += -w;
        }
        return obj;
    };

    for (int iter = 1; iter <= max_iters; ++iter) {
        out.iterations = iter;

        std::int64_t changes = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = -1;
            double best_cost = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                double cost = d2(i, c);
                for (const auto& [j, w] : adj.must[static_cast<std::size_t>(i)])
                    if (out.labels[static_cast<std::size_t>(j)] != c) cost += w;
                for (const auto& [j, w] : adj.cannot[static_cast<std::size_t>(i)])
                    if (out.labels[static_cast<std::size_t>(j)] == c) cost += w;
                if (cost < best_cost) {
                    best_cost = cost;
                    best = c;
                }
            }
            if (out.labels[static_cast<std::size_t>(i)] != best) {
                out.labels[static_cast<std::size_t>(i)] = best;
                ++changes;
            }
        }

        std::vector<std::int64_t> sizes(static_cast<std::size_t>(k), 0);
        out.centroids.setZero();
        for (Eigen::Index i = 0; i < n; ++i) {
            const int c = out.labels[static_cast<std::size_t>(i)];
            out.centroids.row(c) += x.row(i);
            ++sizes[static_cast<std::size_t>(c)];
        }
        for (int c = 0; c < k; ++c)
            if (sizes[static_cast<std::size_t>(c)] > 0)
                out.centroids.row(c) /= static_cast<double>(sizes[static_cast<std::size_t>(c)]);

        bool repaired = false;
        for (int c = 0; c < k; ++c) {
            if (sizes[static_cast<std::size_t>(c)] > 0) continue;
            Eigen::Index donor = -1;
            double worst = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const int ci = out.labels[static_cast<std::size_t>(i)];
                if (sizes[static_cast<std::size_t>(ci)] <= 1) continue;
                const double dist = (x.row(i) - out.centroids.row(ci)).squaredNorm();
                if (dist > worst) {
                    worst = dist;
                    donor = i;
                }
            }
            if (donor < 0) throw NumericalError("cannot repair empty cluster");
            --sizes[static_cast<std::size_t>(out.labels[static_cast<std::size_t>(donor)])];
            out.labels[static_cast<std::size_t>(donor)] = c;
            sizes[static_cast<std::size_t>(c)] = 1;
            out.centroids.row(c) = x.row(donor);
            repaired = true;
        }

        out.objective_trace.push_back(objective());
        if (changes == 0 && !repaired) {
            out.converged = true;
            break;
        }
        refresh_d2();
    }
    return out;
}

inline void row_normalize(Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double norm = m.row(i).norm();
        if (norm > 1e-150) m.row(i) /= norm;
    }
}

}  // namespace detail

/// Seeded k-means++ (distance-squared seeding plus Lloyd iterations).
inline ClusterAssignment kmeans_pp(const Eigen::MatrixXd& x, int k, std::uint64_t seed,
                                   int max_iters = 300) {
    return detail::penalized_lloyd(x, k, detail::ConstraintAdjacency{
                                             std::vector<std::vector<std::pair<int, double>>>(
                                                 static_cast<std::size_t>(x.rows())),
                                             std::vector<std::vector<std::pair<int, double>>>(
                                                 static_cast<std::size_t>(x.rows()))},
                                   {}, seed, max_iters);
}

/// Weighted constrained k-means: k-means++ seeding, then penalized sweeps.
/// The signed matrix must carry a positive weight for every must-link and a
/// negative weight for every cannot-link it is asked to enforce.
inline ClusterAssignment wckmeans(const Eigen::MatrixXd& x, int k,
                                  const std::vector<std::pair<int, int>>& must_links,
                                  const std::vector<std::pair<int, int>>& cannot_links,
                                  const WeightedConstraintMatrix& matrix, std::uint64_t seed,
                                  int max_iters = 100) {
    for (const auto& [a, b] : must_links)
        if (!matrix.has(a, b) || !(matrix.theta(a, b) > 0.0))
            throw ValidationError("must-link (" + std::to_string(a) + "," + std::to_string(b) +
                                  ") lacks a positive weight");
    // The weakest cannot-link can legitimately normalize to weight 0.
    for (const auto& [a, b] : cannot_links)
        if (!matrix.has(a, b) || matrix.theta(a, b) > 0.0)
            throw ValidationError("cannot-link (" + std::to_string(a) + "," + std::to_string(b) +
                                  ") lacks a non-positive weight");
    if (matrix.list.size() != must_links.size() + cannot_links.size())
        throw ValidationError("constraint matrix does not match the given link sets");
    return detail::penalized_lloyd(x, k, detail::build_adjacency(static_cast<int>(x.rows()), matrix),
                                   matrix.list, seed, max_iters);
}

inline ClusterAssignment wckmeans(const Eigen::MatrixXd& x, int k, const ConstraintSet& set,
                                  const WeightedConstraintMatrix& matrix, std::uint64_t seed,
                                  int max_iters = 100) {
    return wckmeans(x, k, set.pairs(Relation::must_link), set.pairs(Relation::cannot_link),
                    matrix, seed, max_iters);
}

// ---------------------------------------------------------------------------
// Spectral methods

/// Graph operators shared by the spectral clusterers: the thresholded cosine
/// affinity, its degree vector, the symmetric normalized Laplacian, and the
/// degree-normalized constraint matrix.
struct SpectralOperators {
    Eigen::MatrixXd affinity;
    Eigen::VectorXd degrees;
    Eigen::MatrixXd laplacian;
    Eigen::MatrixXd constraint;
};

inline SpectralOperators build_spectral_operators(const Eigen::MatrixXd& emb,
                                                  const WeightedConstraintMatrix* matrix = nullptr) {
    const auto n = emb.rows();
    if (n == 0) throw ValidationError("cannot build operators from an empty matrix");
    SpectralOperators ops;
    ops.affinity = (emb * emb.transpose()).cwiseMax(0.0);
    ops.affinity.diagonal().setZero();
    ops.degrees = ops.affinity.rowwise().sum().cwiseMax(DegreeProfile::kEps);
    const Eigen::VectorXd dm12 = ops.degrees.array().rsqrt();
    ops.laplacian = Eigen::MatrixXd::Identity(n, n) -
                    dm12.asDiagonal() * ops.affinity * dm12.asDiagonal();
    ops.laplacian = ((ops.laplacian + ops.laplacian.transpose()) / 2.0).eval();
    if (matrix != nullptr && !matrix->empty()) {
        if (matrix->n != n)
            throw ValidationError("constraint matrix size does not match the embeddings");
        ops.constraint = dm12.asDiagonal() * matrix->dense() * dm12.asDiagonal();
        ops.constraint = ((ops.constraint + ops.constraint.transpose()) / 2.0).eval();
    } else {
        ops.constraint = Eigen::MatrixXd::Zero(n, n);
    }
    return ops;
}

/// Plain normalized spectral clustering: bottom-K eigenvectors of the
/// Laplacian, rows normalized, clustered with seeded k-means++.
inline ClusterAssignment spectral_baseline(const Eigen::MatrixXd& emb, int k, std::uint64_t seed,
                                           int kmeans_iters = 300) {
    const auto n = emb.rows();
    if (k < 1 || k > n)
        throw ValidationError("cluster count must lie in [1, " + std::to_string(n) + "]");
    const SpectralOperators ops = build_spectral_operators(emb);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ops.laplacian);
    if (es.info() != Eigen::Success)
        throw NumericalError("Laplacian eigendecomposition failed");
    Eigen::MatrixXd v = es.eigenvectors().leftCols(k);
    detail::row_normalize(v);
    ClusterAssignment out = kmeans_pp(v, k, seed, kmeans_iters);
    out.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + k);
    return out;
}

struct WcscOptions {
    double alpha = 0.0;         // 0 = auto: half the constraint operator's spectral radius
    int max_alpha_attempts = 5; // feasibility retries, halving alpha each time
    int kmeans_iters = 300;
    double residual_tol = 1e-6;
};

namespace detail {

struct GeneralizedEigenPair {
    double lambda = 0.0;
    int column = 0;
    Eigen::VectorXd vector;
};

/// Solves L v = lambda B v with the QZ algorithm, returning real finite
/// pairs with unit eigenvectors, ordered by eigenvalue then input column.
inline std::vector<GeneralizedEigenPair> real_generalized_pairs(const Eigen::MatrixXd& l,
                                                                const Eigen::MatrixXd& b) {
    const auto n = static_cast<lapack_int>(l.rows());
    Eigen::MatrixXd a_work = l, b_work = b;
    Eigen::VectorXd alphar(n), alphai(n), beta(n);
    Eigen::MatrixXd vr(n, n);
    const lapack_int info = LAPACKE_dggev(
        LAPACK_COL_MAJOR, 'N', 'V', n, a_work.data(), n, b_work.data(), n, alphar.data(),
        alphai.data(), beta.data(), nullptr, 1, vr.data(), n);
    if (info != 0)
        throw NumericalError("generalized eigensolver failed (dggev info=" +
                             std::to_string(info) + ")");
    std::vector<GeneralizedEigenPair> pairs;
    for (lapack_int j = 0; j < n; ++j) {
        if (alphai(j) != 0.0) {
            ++j;  // complex conjugate pair spans two columns; skip both
            continue;
        }
        if (std::abs(beta(j)) < 1e-12) continue;
        GeneralizedEigenPair p;
        p.lambda = alphar(j) / beta(j);
        p.column = static_cast<int>(j);
        p.vector = vr.col(j).normalized();
        pairs.push_back(std::move(p));
    }
    std::sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) {
        if (x.lambda != y.lambda) return x.lambda < y.lambda;
        return x.column < y.column;
    });
    return pairs;
}

}  // namespace detail

/// Weighted constrained spectral clustering. Feasible directions are the
/// generalized eigenvectors v of (L, R - alpha I) with positive constraint
/// alignment v' (R - alpha I) v; the K of smallest eigenvalue span the
/// embedding. When fewer than K are feasible, alpha is halved and the solve
/// retried; after max_alpha_attempts the plain spectral baseline is used and
/// flagged. An empty constraint matrix short-circuits to the baseline, since
/// the shifted operator -alpha I admits no feasible vector at all.
inline ClusterAssignment wcsc(const Eigen::MatrixXd& emb, int k,
                              const WeightedConstraintMatrix& matrix, std::uint64_t seed,
                              const WcscOptions& options = {}) {
    const auto n = emb.rows();
    if (k < 1 || k > n)
        throw ValidationError("cluster count must lie in [1, " + std::to_string(n) + "]");
    if (options.alpha < 0.0) throw ValidationError("alpha must be non-negative");
    if (matrix.empty()) {
        ClusterAssignment out = spectral_baseline(emb, k, seed, options.kmeans_iters);
        out.used_fallback = true;
        return out;
    }

    const SpectralOperators ops = build_spectral_operators(emb, &matrix);
    double alpha = options.alpha;
    if (alpha == 0.0) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ops.constraint, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success)
            throw NumericalError("constraint operator eigendecomposition failed");
        alpha = 0.5 * es.eigenvalues().cwiseAbs().maxCoeff();
    }

    const Eigen::VectorXd dm12 = ops.degrees.array().rsqrt();
    for (int attempt = 0; attempt < options.max_alpha_attempts && alpha > 0.0; ++attempt) {
        const Eigen::MatrixXd r_alpha =
            ops.constraint - alpha * Eigen::MatrixXd::Identity(n, n);
        auto pairs = detail::real_generalized_pairs(ops.laplacian, r_alpha);
        std::vector<detail::GeneralizedEigenPair> feasible;
        for (auto& p : pairs)
            if (p.vector.dot(r_alpha * p.vector) > 0.0) feasible.push_back(std::move(p));
        if (static_cast<int>(feasible.size()) >= k) {
            Eigen::MatrixXd v(n, k);
            ClusterAssignment out;
            for (int c = 0; c < k; ++c) {
                const auto& p = feasible[static_cast<std::size_t>(c)];
                v.col(c) = p.vector;
                const double residual =
                    (ops.laplacian * p.vector - p.lambda * (r_alpha * p.vector)).norm();
                if (residual > options.residual_tol)
                    throw NumericalError("generalized eigenpair residual " +
                                         std::to_string(residual) +
                                         " exceeds tolerance at lambda=" +
                                         std::to_string(p.lambda));
                out.eigenvalues.push_back(p.lambda);
                out.eigen_residuals.push_back(residual);
            }
            Eigen::MatrixXd u = dm12.asDiagonal() * v;
            detail::row_normalize(u);
            ClusterAssignment km = kmeans_pp(u, k, seed, options.kmeans_iters);
            out.labels = std::move(km.labels);
            out.centroids = std::move(km.centroids);
            out.iterations = km.iterations;
            out.converged = km.converged;
            out.objective_trace = std::move(km.objective_trace);
            out.alpha = alpha;
            return out;
        }
        alpha /= 2.0;
    }

    ClusterAssignment out = spectral_baseline(emb, k, seed, options.kmeans_iters);
    out.used_fallback = true;
    out.alpha = alpha;
    return out;
}

// ---------------------------------------------------------------------------
// Persistence

inline void write_assignments(const std::string& path, const std::vector<int>& labels) {
    JsonlWriter out(path);
    for (std::size_t i = 0; i < labels.size(); ++i)
        out.write(json{{"id", i}, {"cluster", labels[i]}});
    out.close();
}

inline std::vector<int> read_assignments(const std::string& path) {
    std::vector<std::pair<int, int>> rows;
    for_each_jsonl(path, [&](std::size_t lineno, const json& j) {
        const std::string where = path + ":" + std::to_string(lineno);
        if (!j.is_object() || !j.contains("id") || !j.contains("cluster") ||
            !j["id"].is_number_integer() || !j["cluster"].is_number_integer())
            throw ValidationError(where + ": expected integer fields \"id\" and \"cluster\"");
        rows.emplace_back(j["id"].get<int>(), j["cluster"].get<int>());
    });
    std::sort(rows.begin(), rows.end());
    std::vector<int> labels;
    labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].first != static_cast<int>(i))
            throw ValidationError(path + ": assignment ids are not dense");
        labels.push_back(rows[i].second);
    }
    return labels;
}

}  // namespace cequel
