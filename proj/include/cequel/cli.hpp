#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cequel/clustering.hpp"
#include "cequel/corpus.hpp"
#include "cequel/edge_select.hpp"
#include "cequel/errors.hpp"
#include "cequel/eval.hpp"
#include "cequel/http_backend.hpp"
#include "cequel/jsonl.hpp"
#include "cequel/oracle.hpp"
#include "cequel/prompts.hpp"
#include "cequel/triangle_select.hpp"
#include "cequel/weighting.hpp"

namespace cequel {

/// How many queries the token budget buys at the corpus' mean text length.
struct BudgetPlan {
    double q = 0.0;          // token budget
    double s = 0.0;          // mean tokens per text
    std::string mode;        // "edge" or "triangle"
    std::int64_t count = 0;  // derived query count

    json to_json() const {
        return json{{"budget", q}, {"mean_tokens", s}, {"mode", mode}, {"count", count}};
    }
};

struct PipelineConfig {
    // artifact paths
    std::string corpus;
    std::string embeddings;
    std::string selection;
    std::string constraints;
    std::string cache;
    std::string assignments;
    std::string report;
    std::string weights_out;
    std::string operators_out;

    // parameters
    double budget = 0.0;
    int clusters = 0;
    std::string mode = "edge";      // edge | triangle
    std::string oracle = "mock";    // mock | cached | http-llm
    std::string model = "gpt-4o-mini";
    std::string api_url = "https://api.openai.com";
    std::string api_path = "/v1/chat/completions";
    std::string api_key_env = "CEQUEL_API_KEY";
    std::string template_name = "generic";
    std::string weighting = "pmi";
    std::string clusterer = "wckmeans";  // wckmeans | wcsc | kmeans | spectral
    double alpha = 0.0;                  // 0 = auto
    int max_iters = 0;                   // 0 = per-method default
    double noise_rate = 0.0;
    std::uint64_t seed = 0;
    int parallelism = 1;
    int retries = 2;
    int timeout = 60;

    json echo() const {
        return json{{"mode", mode},
                    {"oracle", oracle},
                    {"model", model},
                    {"template", template_name},
                    {"weighting", weighting},
                    {"clusterer", clusterer},
                    {"budget", budget},
                    {"clusters", clusters},
                    {"alpha", alpha},
                    {"max_iters", max_iters},
                    {"noise_rate", noise_rate},
                    {"seed", seed},
                    {"parallelism", parallelism},
                    {"retries", retries}};
    }
};

namespace detail {

inline void require(bool ok, const std::string& message) {
    if (!ok) throw ValidationError(message);
}

inline Corpus load_corpus_with_embeddings(const PipelineConfig& cfg) {
    require(!cfg.corpus.empty(), "a corpus path is required");
    require(!cfg.embeddings.empty(), "an embeddings path is required");
    Corpus corpus = load_corpus(cfg.corpus);
    attach_embeddings(corpus, load_embeddings(cfg.embeddings));
    return corpus;
}

inline std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
    try {
        return fn();
    } catch (const ValidationError& e) {
        throw ValidationError(name + ": " + e.what());
    } catch (const TransportError& e) {
        throw TransportError(name + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(name + ": " + e.what());
    }
}

inline std::shared_ptr<OracleBackend> make_backend(const PipelineConfig& cfg, const Corpus& corpus) {
    std::shared_ptr<QueryCache> cache;
    if (!cfg.cache.empty()) cache = std::make_shared<QueryCache>(cfg.cache);

    std::shared_ptr<OracleBackend> inner;
    if (cfg.oracle == "mock") {
        inner = std::make_shared<MockOracle>(corpus, cfg.noise_rate, cfg.seed);
    } else if (cfg.oracle == "http-llm") {
        HttpOracleConfig http;
        http.base_url = cfg.api_url;
        http.path = cfg.api_path;
        http.model = cfg.model;
        http.api_key_env = cfg.api_key_env;
        http.timeout_seconds = cfg.timeout;
        inner = std::make_shared<HttpChatBackend>(http);
    } else if (cfg.oracle == "cached") {
        require(cache != nullptr, "oracle \"cached\" requires a cache path");
        return std::make_shared<CacheReplayBackend>(cache);
    } else {
        throw ValidationError("unknown oracle kind: " + cfg.oracle);
    }
    if (cache) return std::make_shared<CachingBackend>(inner, cache);
    return inner;
}

inline void write_report_file(const std::string& path, const json& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ValidationError("cannot open file for writing: " + path);
    out << report.dump(2) << "\n";
    out.close();
    if (out.fail()) throw ValidationError("write failed: " + path);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// select

struct SelectOutcome {
    BudgetPlan plan;
    std::size_t written = 0;
    bool exhausted = false;

    json to_json() const {
        return json{{"stage", "select"},
                    {"plan", plan.to_json()},
                    {"written", written},
                    {"exhausted", exhausted}};
    }
};

inline SelectOutcome cmd_select(const PipelineConfig& cfg) {
    return detail::stage("select", [&] {
        detail::require(!cfg.selection.empty(), "a selection output path is required");
        detail::require(cfg.mode == "edge" || cfg.mode == "triangle",
                        "mode must be \"edge\" or \"triangle\"");
        const Corpus corpus = detail::load_corpus_with_embeddings(cfg);
        const DegreeProfile deg = compute_degrees(corpus.embeddings);
        const double s = corpus.mean_tokens();

        SelectOutcome out;
        out.plan.q = cfg.budget;
        out.plan.s = s;
        out.plan.mode = cfg.mode;
        if (cfg.mode == "edge") {
            out.plan.count = edge_budget(cfg.budget, s, corpus.size());
            if (out.plan.count == 0) {
                JsonlWriter(cfg.selection).close();
                return out;
            }
            const EdgeSelection sel = select_edges(deg, out.plan.count);
            write_edge_selection(cfg.selection, sel);
            out.written = sel.edges.size();
            out.exhausted = sel.exhausted;
        } else {
            out.plan.count = triangle_budget(cfg.budget, s, corpus.size());
            if (out.plan.count == 0) {
                JsonlWriter(cfg.selection).close();
                return out;
            }
            const TriangleSelection sel = select_triangles(deg, out.plan.count);
            write_triangle_selection(cfg.selection, sel);
            out.written = sel.triangles.size();
            out.exhausted = sel.exhausted;
        }
        return out;
    });
}

// ---------------------------------------------------------------------------
// query

struct QueryOutcome {
    QueryRunReport report;
    std::size_t must_links = 0;
    std::size_t cannot_links = 0;
    int conflicts = 0;
    std::optional<double> constraint_flip_rate;  // vs labels, when available

    json to_json() const {
        json j{{"stage", "query"},
               {"queries", report.queries},
               {"answered", report.answered},
               {"skipped", report.skipped},
               {"parse_failures", report.parse_failures},
               {"transport_failures", report.transport_failures},
               {"prompt_tokens", report.prompt_tokens},
               {"text_tokens", report.text_tokens},
               {"must_links", must_links},
               {"cannot_links", cannot_links},
               {"conflicts", conflicts}};
        if (constraint_flip_rate) j["constraint_flip_rate"] = *constraint_flip_rate;
        return j;
    }
};

inline QueryOutcome cmd_query(const PipelineConfig& cfg) {
    return detail::stage("query", [&] {
        detail::require(!cfg.corpus.empty(), "a corpus path is required");
        detail::require(!cfg.selection.empty(), "a selection input path is required");
        detail::require(!cfg.constraints.empty(), "a constraints output path is required");
        detail::require(cfg.mode == "edge" || cfg.mode == "triangle",
                        "mode must be \"edge\" or \"triangle\"");
        detail::require(cfg.retries >= 0, "retries must be non-negative");
        detail::require(cfg.parallelism >= 1, "parallelism must be at least 1");

        const Corpus corpus = load_corpus(cfg.corpus);
        const PromptTemplate tmpl = builtin_template(cfg.template_name);
        const auto backend = detail::make_backend(cfg, corpus);
        const QueryRunOptions opts{cfg.retries, cfg.parallelism};

        QueryRunResult result;
        if (cfg.mode == "edge") {
            result = run_edge_queries(corpus, read_edge_selection(cfg.selection), tmpl, *backend,
                                      opts);
        } else {
            result = run_triangle_queries(corpus, read_triangle_selection(cfg.selection), tmpl,
                                          *backend, opts);
        }
        write_constraints(cfg.constraints, result.constraints);

        QueryOutcome out;
        out.report = result.report;
        out.must_links = result.constraints.must_count();
        out.cannot_links = result.constraints.cannot_count();
        out.conflicts = result.constraints.conflicts();
        if (corpus.has_labels() && !result.constraints.items().empty()) {
            const auto truth = corpus.label_ids();
            std::int64_t flips = 0;
            for (const auto& c : result.constraints.items()) {
                const bool same = truth[static_cast<std::size_t>(c.a)] ==
                                  truth[static_cast<std::size_t>(c.b)];
                if (same != (c.rel == Relation::must_link)) ++flips;
            }
            out.constraint_flip_rate =
                static_cast<double>(flips) / static_cast<double>(result.constraints.size());
        }
        return out;
    });
}

// ---------------------------------------------------------------------------
// cluster

struct ClusterOutcome {
    ClusterAssignment assignment;
    std::optional<MetricReport> metrics;
    json report;
};

inline ClusterOutcome cmd_cluster(const PipelineConfig& cfg,
                                  const std::optional<QueryOutcome>& query_outcome = std::nullopt,
                                  const std::optional<BudgetPlan>& plan = std::nullopt) {
    return detail::stage("cluster", [&] {
        detail::require(!cfg.assignments.empty(), "an assignments output path is required");
        detail::require(cfg.clusters >= 2, "clustering requires at least 2 clusters");
        const Corpus corpus = detail::load_corpus_with_embeddings(cfg);
        detail::require(cfg.clusters <= corpus.size(),
                        "cluster count exceeds the corpus size");
        const std::int64_t t0 = detail::now_ms();

        ConstraintSet constraints;
        if (!cfg.constraints.empty()) constraints = read_constraints(cfg.constraints);
        const WeightScheme scheme = parse_weight_scheme(cfg.weighting);

        ClusterOutcome out;
        json weighting_echo;
        const bool constrained = cfg.clusterer == "wckmeans" || cfg.clusterer == "wcsc";
        if (constrained) {
            const DegreeProfile deg = compute_degrees(corpus.embeddings);
            const WeightMode wmode =
                cfg.clusterer == "wcsc" ? WeightMode::wcsc : WeightMode::wckmeans;
            const WeightedConstraintMatrix matrix =
                build_constraint_matrix(deg, corpus.embeddings, constraints, scheme, wmode);
            weighting_echo = json{{"scheme", weight_scheme_name(scheme)},
                                  {"pairs", matrix.list.size()}};
            if (wmode == WeightMode::wcsc) {
                weighting_echo["range"] = json::array({matrix.ranges.wcsc_lo, matrix.ranges.wcsc_hi});
            } else {
                weighting_echo["must_link_range"] =
                    json::array({matrix.ranges.ml_lo, matrix.ranges.ml_hi});
                weighting_echo["cannot_link_range"] =
                    json::array({matrix.ranges.cl_lo, matrix.ranges.cl_hi});
            }
            if (!cfg.weights_out.empty()) write_weighted_constraints(cfg.weights_out, matrix);
            if (cfg.clusterer == "wckmeans") {
                out.assignment = wckmeans(corpus.embeddings, cfg.clusters, constraints, matrix,
                                          cfg.seed, cfg.max_iters > 0 ? cfg.max_iters : 100);
            } else {
                WcscOptions wopts;
                wopts.alpha = cfg.alpha;
                if (cfg.max_iters > 0) wopts.kmeans_iters = cfg.max_iters;
                out.assignment = wcsc(corpus.embeddings, cfg.clusters, matrix, cfg.seed, wopts);
                if (!cfg.operators_out.empty()) {
                    const SpectralOperators ops =
                        build_spectral_operators(corpus.embeddings, &matrix);
                    write_matrix_binary(cfg.operators_out + ".laplacian.bin", ops.laplacian);
                    write_matrix_binary(cfg.operators_out + ".constraint.bin", ops.constraint);
                }
            }
        } else if (cfg.clusterer == "kmeans") {
            out.assignment = kmeans_pp(corpus.embeddings, cfg.clusters, cfg.seed,
                                       cfg.max_iters > 0 ? cfg.max_iters : 300);
        } else if (cfg.clusterer == "spectral") {
            out.assignment = spectral_baseline(corpus.embeddings, cfg.clusters, cfg.seed,
                                               cfg.max_iters > 0 ? cfg.max_iters : 300);
        } else {
            throw ValidationError("unknown clusterer: " + cfg.clusterer);
        }
        write_assignments(cfg.assignments, out.assignment.labels);
        const std::int64_t cluster_ms = detail::now_ms() - t0;

        json report{{"config", cfg.echo()}, {"artifacts", json::object()}};
        report["artifacts"]["assignments"] = cfg.assignments;
        report["timings"] = json{{"cluster_ms", cluster_ms}};
        json tokens{{"budget", cfg.budget}};
        if (plan) report["plan"] = plan->to_json();
        if (query_outcome) {
            report["query"] = query_outcome->to_json();
            tokens["prompt_tokens"] = query_outcome->report.prompt_tokens;
            tokens["text_tokens"] = query_outcome->report.text_tokens;
            if (cfg.budget > 0.0)
                tokens["overhead_margin"] =
                    static_cast<double>(query_outcome->report.prompt_tokens) / cfg.budget - 1.0;
        }
        report["tokens"] = tokens;
        if (!constraints.items().empty() || constrained) {
            report["constraints"] = json{{"must", constraints.must_count()},
                                         {"cannot", constraints.cannot_count()},
                                         {"conflicts", constraints.conflicts()}};
            if (!weighting_echo.is_null()) report["weighting"] = weighting_echo;
        }
        json diag{{"iterations", out.assignment.iterations},
                  {"converged", out.assignment.converged},
                  {"used_fallback", out.assignment.used_fallback}};
        if (cfg.clusterer == "wcsc") {
            diag["alpha"] = out.assignment.alpha;
            if (!out.assignment.eigen_residuals.empty())
                diag["eigen_residual_max"] =
                    *std::max_element(out.assignment.eigen_residuals.begin(),
                                      out.assignment.eigen_residuals.end());
        }
        report["clustering"] = diag;
        if (corpus.has_labels()) {
            out.metrics = evaluate(out.assignment.labels, corpus.label_ids());
            report["acc"] = out.metrics->acc;
            report["nmi"] = out.metrics->nmi;
        }
        out.report = report;
        if (!cfg.report.empty()) detail::write_report_file(cfg.report, report);
        return out;
    });
}

// ---------------------------------------------------------------------------
// pipeline

inline ClusterOutcome cmd_pipeline(const PipelineConfig& cfg) {
    const std::int64_t t0 = detail::now_ms();
    const SelectOutcome selected = cmd_select(cfg);
    const std::int64_t t1 = detail::now_ms();
    const QueryOutcome queried = cmd_query(cfg);
    const std::int64_t t2 = detail::now_ms();
    PipelineConfig cluster_cfg = cfg;
    if (!cfg.report.empty()) cluster_cfg.report.clear();  // written once, with full timings
    ClusterOutcome out = cmd_cluster(cluster_cfg, queried, selected.plan);
    const std::int64_t t3 = detail::now_ms();
    out.report["select"] = selected.to_json();
    out.report["timings"]["select_ms"] = t1 - t0;
    out.report["timings"]["query_ms"] = t2 - t1;
    out.report["timings"]["total_ms"] = t3 - t0;
    if (!cfg.report.empty()) detail::write_report_file(cfg.report, out.report);
    return out;
}

}  // namespace cequel
