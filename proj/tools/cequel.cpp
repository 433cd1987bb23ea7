#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cequel/cli.hpp"

namespace {

void add_common_options(CLI::App& app, cequel::PipelineConfig& cfg) {
    app.set_config("--config", "", "Flat key=value config file; flags override it");

    app.add_option("--corpus", cfg.corpus, "Corpus JSON-lines file");
    app.add_option("--embeddings", cfg.embeddings, "Embedding matrix (.jsonl or binary)");
    app.add_option("--selection", cfg.selection, "Selection JSON-lines file");
    app.add_option("--constraints", cfg.constraints, "Constraints JSON-lines file");
    app.add_option("--cache", cfg.cache, "Oracle cache JSON-lines file");
    app.add_option("--assignments", cfg.assignments, "Assignments JSON-lines output");
    app.add_option("--report", cfg.report, "Report JSON output");
    app.add_option("--weights-out", cfg.weights_out, "Weighted constraints JSON-lines output");
    app.add_option("--operators-out", cfg.operators_out,
                   "Path prefix for binary dumps of the spectral operators");

    app.add_option("--budget", cfg.budget, "Token budget Q");
    app.add_option("--clusters", cfg.clusters, "Number of clusters K");
    app.add_option("--mode", cfg.mode, "Query mode: edge | triangle");
    app.add_option("--oracle", cfg.oracle, "Oracle kind: mock | cached | http-llm");
    app.add_option("--model", cfg.model, "Model name for the HTTP oracle");
    app.add_option("--api-url", cfg.api_url, "Base URL of the HTTP oracle");
    app.add_option("--api-path", cfg.api_path, "Request path of the HTTP oracle");
    app.add_option("--api-key-env", cfg.api_key_env,
                   "Environment variable holding the API key");
    app.add_option("--template", cfg.template_name,
                   "Prompt template: bbcnews | tweet | bank77 | reddit | clinc | massive | generic");
    app.add_option("--weighting", cfg.weighting,
                   "Constraint weighting: pmi | ipmi | ess | sess | less | sec | ssec | none");
    app.add_option("--clusterer", cfg.clusterer,
                   "Clusterer: wckmeans | wcsc | kmeans | spectral");
    app.add_option("--alpha", cfg.alpha, "Spectral constraint shift (0 = auto)");
    app.add_option("--max-iters", cfg.max_iters, "Iteration cap (0 = method default)");
    app.add_option("--noise-rate", cfg.noise_rate, "Mock oracle corruption probability");
    app.add_option("--seed", cfg.seed, "Random seed");
    app.add_option("--parallelism", cfg.parallelism, "Concurrent oracle queries");
    app.add_option("--retries", cfg.retries, "Extra attempts per failed query");
    app.add_option("--timeout", cfg.timeout, "HTTP timeout in seconds");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Budget-aware constraint acquisition and constrained clustering"};
    app.require_subcommand(1);

    cequel::PipelineConfig cfg;
    // Options live on the main app so a flat key=value config file binds to
    // them; fallthrough lets the same flags appear after the subcommand name.
    add_common_options(app, cfg);
    auto* select = app.add_subcommand("select", "Pick the most informative pairs or triplets");
    auto* query = app.add_subcommand("query", "Ask the oracle about a selection");
    auto* cluster = app.add_subcommand("cluster", "Cluster with weighted constraints");
    auto* pipeline = app.add_subcommand("pipeline", "Run select, query, and cluster end to end");
    for (CLI::App* sub : {select, query, cluster, pipeline}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (select->parsed()) {
            const auto out = cequel::cmd_select(cfg);
            if (out.exhausted)
                std::cerr << "warning: candidate pool exhausted before the budget; wrote "
                          << out.written << " of " << out.plan.count << "\n";
            std::cout << out.to_json().dump() << "\n";
        } else if (query->parsed()) {
            const auto out = cequel::cmd_query(cfg);
            std::cout << out.to_json().dump() << "\n";
        } else if (cluster->parsed()) {
            const auto out = cequel::cmd_cluster(cfg);
            std::cout << out.report.dump() << "\n";
        } else if (pipeline->parsed()) {
            const auto out = cequel::cmd_pipeline(cfg);
            std::cout << out.report.dump() << "\n";
        }
    } catch (const cequel::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const cequel::TransportError& e) {
        std::cerr << "transport error: " << e.what() << "\n";
        return 2;
    } catch (const cequel::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
