#pragma once

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cequel/corpus.hpp"
#include "cequel/jsonl.hpp"

namespace testsupport {

/// Three unit embeddings (1,0), (0,1), (0.6,0.8) with token counts 2, 3, 5:
/// similarities s12=0, s13=0.6, s23=0.8 and degrees 1.6, 1.8, 2.4.
inline cequel::Corpus worked_corpus() {
    cequel::Corpus corpus;
    const char* texts[3] = {"alpha beta", "gamma delta epsilon", "one two three four five"};
    const char* labels[3] = {"left", "right", "right"};
    for (int i = 0; i < 3; ++i) {
        cequel::TextInstance t;
        t.id = i;
        t.text = texts[i];
        t.label = labels[i];
        t.token_count = i == 0 ? 2 : (i == 1 ? 3 : 5);
        corpus.instances.push_back(t);
        corpus.file_order.push_back(i);
    }
    corpus.embeddings.resize(3, 2);
    corpus.embeddings << 1.0, 0.0, 0.0, 1.0, 0.6, 0.8;
    return corpus;
}

struct TempDir {
    std::string path;

    TempDir() {
        char tmpl[] = "/tmp/cequel-test-XXXXXX";
        path = mkdtemp(tmpl);
    }

    std::string file(const std::string& name) const { return path + "/" + name; }
};

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

/// Noisy spherical mixture: k unit centers, gaussian jitter sigma, rows
/// re-normalized. Labels cycle 0..k-1, token counts are fixed at 8.
inline cequel::Corpus make_blobs(int k, int n, int d, double sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd centers(k, d);
    for (int c = 0; c < k; ++c) {
        for (int j = 0; j < d; ++j) centers(c, j) = gauss(rng);
        centers.row(c).normalize();
    }
    cequel::Corpus corpus;
    corpus.embeddings.resize(n, d);
    for (int i = 0; i < n; ++i) {
        const int c = i % k;
        for (int j = 0; j < d; ++j) corpus.embeddings(i, j) = centers(c, j) + sigma * gauss(rng);
        corpus.embeddings.row(i).normalize();
        cequel::TextInstance t;
        t.id = i;
        t.text = "instance " + std::to_string(i);
        t.label = std::to_string(c);
        t.token_count = 8;
        corpus.instances.push_back(std::move(t));
        corpus.file_order.push_back(i);
    }
    return corpus;
}

inline void write_corpus_jsonl(const std::string& path, const cequel::Corpus& corpus) {
    cequel::JsonlWriter out(path);
    for (const auto& t : corpus.instances) {
        cequel::json j{{"id", t.id}, {"text", t.text}, {"tokens", t.token_count}};
        if (t.label) j["label"] = *t.label;
        out.write(j);
    }
    out.close();
}

}  // namespace testsupport
