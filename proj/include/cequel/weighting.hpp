#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cequel/corpus.hpp"
#include "cequel/edge_select.hpp"
#include "cequel/errors.hpp"
#include "cequel/jsonl.hpp"
#include "cequel/oracle.hpp"

namespace cequel {

enum class WeightScheme { ess, sess, less, sec_score, ssec, ipmi, pmi, none };

inline WeightScheme parse_weight_scheme(const std::string& name) {
    if (name == "ess") return WeightScheme::ess;
    if (name == "sess") return WeightScheme::sess;
    if (name == "less") return WeightScheme::less;
    if (name == "sec") return WeightScheme::sec_score;
    if (name == "ssec") return WeightScheme::ssec;
    if (name == "ipmi") return WeightScheme::ipmi;
    if (name == "pmi") return WeightScheme::pmi;
    if (name == "none") return WeightScheme::none;
    throw ValidationError("unknown weighting scheme: " + name);
}

inline std::string weight_scheme_name(WeightScheme s) {
    switch (s) {
        case WeightScheme::ess: return "ess";
        case WeightScheme::sess: return "sess";
        case WeightScheme::less: return "less";
        case WeightScheme::sec_score: return "sec";
        case WeightScheme::ssec: return "ssec";
        case WeightScheme::ipmi: return "ipmi";
        case WeightScheme::pmi: return "pmi";
        case WeightScheme::none: return "none";
    }
    throw ValidationError("unknown weighting scheme");
}

/// Whether weights feed the spectral method (one joint range, [0.5, 1.5]) or
/// the constrained k-means (must-links and cannot-links normalized apart,
/// [0.01, 0.1] and [0, 0.01]).
enum class WeightMode { wcsc, wckmeans };

namespace detail {

inline double clamped_similarity(const Eigen::MatrixXd& emb, int a, int b) {
    return std::max(ess(emb, a, b), DegreeProfile::kEps);
}

}  // namespace detail

/// Importance of the pair (a, b): how surprising it is that two texts this
/// similar have degrees this large. High for similar low-degree pairs.
inline double pmi(const DegreeProfile& deg, const Eigen::MatrixXd& emb, int a, int b) {
    const double s = detail::clamped_similarity(emb, a, b);
    return std::log(deg.degrees(a) * deg.degrees(b) / s * deg.inv_degree_sum + 1.0);
}

inline double scheme_weight(const DegreeProfile& deg, const Eigen::MatrixXd& emb, int a, int b,
                            WeightScheme scheme) {
    const double s = detail::clamped_similarity(emb, a, b);
    switch (scheme) {
        case WeightScheme::ess: return s;
        case WeightScheme::sess: return std::sqrt(s);
        case WeightScheme::less: return std::log(s + 1.0);
        case WeightScheme::sec_score: return sec(deg, a, b);
        case WeightScheme::ssec: return std::sqrt(sec(deg, a, b));
        case WeightScheme::ipmi:
            return std::log(s * deg.degree_sum / (deg.degrees(a) * deg.degrees(b)) + 1.0);
        case WeightScheme::pmi: return pmi(deg, emb, a, b);
        case WeightScheme::none: return 1.0;
    }
    throw ValidationError("unknown weighting scheme");
}

/// Batch evaluation over many pairs with vectorized array expressions.
inline Eigen::VectorXd scheme_weights(const DegreeProfile& deg, const Eigen::MatrixXd& emb,
                                      const std::vector<std::pair<int, int>>& pairs,
                                      WeightScheme scheme) {
    const auto m = static_cast<Eigen::Index>(pairs.size());
    Eigen::ArrayXd da(m), db(m), s(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        da(i) = deg.degrees(pairs[static_cast<std::size_t>(i)].first);
        db(i) = deg.degrees(pairs[static_cast<std::size_t>(i)].second);
        s(i) = emb.row(pairs[static_cast<std::size_t>(i)].first)
                   .dot(emb.row(pairs[static_cast<std::size_t>(i)].second));
    }
    s = s.max(DegreeProfile::kEps);
    switch (scheme) {
        case WeightScheme::ess: return s.matrix();
        case WeightScheme::sess: return s.sqrt().matrix();
        case WeightScheme::less: return (s + 1.0).log().matrix();
        case WeightScheme::sec_score: return (da.inverse() + db.inverse()).matrix();
        case WeightScheme::ssec: return (da.inverse() + db.inverse()).sqrt().matrix();
        case WeightScheme::ipmi:
            return (s * deg.degree_sum / (da * db) + 1.0).log().matrix();
        case WeightScheme::pmi:
            return (da * db / s * deg.inv_degree_sum + 1.0).log().matrix();
        case WeightScheme::none: return Eigen::VectorXd::Ones(m);
    }
    throw ValidationError("unknown weighting scheme");
}

/// Affine min-max map onto [lo, hi]; an all-equal input maps to the midpoint.
inline std::vector<double> normalize_range(const std::vector<double>& values, double lo, double hi) {
    if (!(hi > lo)) throw ValidationError("normalization range must satisfy hi > lo");
    if (values.empty()) return {};
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    std::vector<double> out(values.size());
    if (*mx == *mn) {
        std::fill(out.begin(), out.end(), (lo + hi) / 2.0);
        return out;
    }
    const double scale = (hi - lo) / (*mx - *mn);
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = lo + (values[i] - *mn) * scale;
    return out;
}

struct WeightingOptions {
    double wcsc_lo = 0.5, wcsc_hi = 1.5;  // joint range for the spectral method
    double ml_lo = 0.01, ml_hi = 0.1;     // must-link range for constrained k-means
    double cl_lo = 0.0, cl_hi = 0.01;     // cannot-link range for constrained k-means
};

/// Signed sparse symmetric matrix of normalized constraint weights:
/// positive entries are must-links, negative entries cannot-links.
struct WeightedConstraintMatrix {
    int n = 0;
    WeightMode mode = WeightMode::wcsc;
    WeightScheme scheme = WeightScheme::pmi;
    WeightingOptions ranges;
    std::vector<std::tuple<int, int, double>> list;  // (a, b, signed weight), a < b
    std::unordered_map<std::int64_t, double> entries;

    bool empty() const { return list.empty(); }

    bool has(int a, int b) const {
        if (a > b) std::swap(a, b);
        return entries.count(key(a, b)) != 0;
    }

    double theta(int a, int b) const {
        if (a > b) std::swap(a, b);
        const auto it = entries.find(key(a, b));
        return it == entries.end() ? 0.0 : it->second;
    }

    Eigen::MatrixXd dense() const {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        for (const auto& [a, b, w] : list) {
            m(a, b) = w;
            m(b, a) = w;
        }
        return m;
    }

    static std::int64_t key(int a, int b) {
        return (static_cast<std::int64_t>(a) << 32) | static_cast<std::uint32_t>(b);
    }
};

/// Computes scheme weights for all constrained pairs, normalizes them into
/// the mode's range(s), and places them with must-link/cannot-link signs.
inline WeightedConstraintMatrix build_constraint_matrix(
    const DegreeProfile& deg, const Eigen::MatrixXd& emb,
    const std::vector<std::pair<int, int>>& must_links,
    const std::vector<std::pair<int, int>>& cannot_links, WeightScheme scheme, WeightMode mode,
    const WeightingOptions& options = {}) {
    const int n = deg.size();
    WeightedConstraintMatrix out;
    out.n = n;
    out.mode = mode;
    out.scheme = scheme;
    out.ranges = options;

    auto canonical = [n](std::vector<std::pair<int, int>> pairs) {
        for (auto& [a, b] : pairs) {
            if (a > b) std::swap(a, b);
            if (a < 0 || b >= n || a == b)
                throw ValidationError("constraint pair (" + std::to_string(a) + "," +
                                      std::to_string(b) + ") is out of range");
        }
        return pairs;
    };
    const auto ml = canonical(must_links);
    const auto cl = canonical(cannot_links);
    {
        std::unordered_map<std::int64_t, bool> seen;
        for (const auto& [a, b] : ml) seen[WeightedConstraintMatrix::key(a, b)] = true;
        for (const auto& [a, b] : cl)
            if (seen.count(WeightedConstraintMatrix::key(a, b)))
                throw ValidationError("pair (" + std::to_string(a) + "," + std::to_string(b) +
                                      ") appears as both must-link and cannot-link");
    }

    auto to_vec = [](const Eigen::VectorXd& v) {
        return std::vector<double>(v.begin(), v.end());
    };
    const auto wml = to_vec(scheme_weights(deg, emb, ml, scheme));
    const auto wcl = to_vec(scheme_weights(deg, emb, cl, scheme));

    std::vector<double> ml_norm, cl_norm;
    if (mode == WeightMode::wcsc) {
        std::vector<double> joint = wml;
        joint.insert(joint.end(), wcl.begin(), wcl.end());
        const auto norm = normalize_range(joint, options.wcsc_lo, options.wcsc_hi);
        ml_norm.assign(norm.begin(), norm.begin() + static_cast<std::ptrdiff_t>(wml.size()));
        cl_norm.assign(norm.begin() + static_cast<std::ptrdiff_t>(wml.size()), norm.end());
    } else {
        ml_norm = normalize_range(wml, options.ml_lo, options.ml_hi);
        cl_norm = normalize_range(wcl, options.cl_lo, options.cl_hi);
    }

    auto place = [&](const std::vector<std::pair<int, int>>& pairs,
                     const std::vector<double>& weights, double sign) {
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const auto [a, b] = pairs[i];
            const double w = sign * weights[i];
            const auto [it, fresh] = out.entries.emplace(WeightedConstraintMatrix::key(a, b), w);
            if (!fresh)
                throw ValidationError("duplicate constraint pair (" + std::to_string(a) + "," +
                                      std::to_string(b) + ")");
            out.list.emplace_back(a, b, w);
        }
    };
    place(ml, ml_norm, +1.0);
    place(cl, cl_norm, -1.0);
    return out;
}

inline WeightedConstraintMatrix build_constraint_matrix(const DegreeProfile& deg,
                                                        const Eigen::MatrixXd& emb,
                                                        const ConstraintSet& set,
                                                        WeightScheme scheme, WeightMode mode,
                                                        const WeightingOptions& options = {}) {
    return build_constraint_matrix(deg, emb, set.pairs(Relation::must_link),
                                   set.pairs(Relation::cannot_link), scheme, mode, options);
}

/// Persists signed weights as JSON-lines {"a", "b", "rel", "weight"} with the
/// normalized magnitude in "weight" and the sign carried by "rel".
inline void write_weighted_constraints(const std::string& path,
                                       const WeightedConstraintMatrix& matrix) {
    JsonlWriter out(path);
    for (const auto& [a, b, w] : matrix.list) {
        out.write(json{{"a", a},
                       {"b", b},
                       {"rel", w > 0 ? "ML" : "CL"},
                       {"weight", std::abs(w)}});
    }
    out.close();
}

}  // namespace cequel
