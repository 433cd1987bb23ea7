#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "cequel/errors.hpp"
#include "cequel/jsonl.hpp"

namespace cequel {

/// Token-count rule applied to raw text when a record carries no explicit
/// "tokens" field.
using Tokenizer = std::function<std::int64_t(const std::string&)>;

/// Default rule: number of whitespace-separated chunks, at least 1.
inline std::int64_t whitespace_token_count(const std::string& text) {
    std::int64_t count = 0;
    bool in_token = false;
    for (char ch : text) {
        const bool ws = ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' ||
                        ch == '\f' || ch == '\v';
        if (!ws && !in_token) ++count;
        in_token = !ws;
    }
    return std::max<std::int64_t>(count, 1);
}

struct TextInstance {
    int id = 0;
    std::string text;
    std::optional<std::string> label;
    std::int64_t token_count = 0;
};

/// A corpus of text instances indexed by dense ids 0..n-1, plus (optionally)
/// a row-aligned matrix of unit-norm embeddings.
struct Corpus {
    std::vector<TextInstance> instances;  // sorted by id
    Eigen::MatrixXd embeddings;           // n x d, unit rows; 0x0 until attached
    std::vector<int> file_order;          // file_order[line] = id of that record

    int size() const { return static_cast<int>(instances.size()); }

    std::int64_t total_tokens() const {
        std::int64_t sum = 0;
        for (const auto& t : instances) sum += t.token_count;
        return sum;
    }

    double mean_tokens() const {
        if (instances.empty()) throw ValidationError("empty corpus has no mean token count");
        return static_cast<double>(total_tokens()) / static_cast<double>(size());
    }

    bool has_labels() const {
        if (instances.empty()) return false;
        return std::all_of(instances.begin(), instances.end(),
                           [](const TextInstance& t) { return t.label.has_value(); });
    }

    bool has_embeddings() const { return embeddings.rows() == size() && size() > 0; }

    /// Distinct labels mapped to contiguous ints by first occurrence in id order.
    std::vector<int> label_ids() const {
        if (!has_labels()) throw ValidationError("corpus has missing labels");
        std::unordered_map<std::string, int> index;
        std::vector<int> out(instances.size());
        for (std::size_t i = 0; i < instances.size(); ++i) {
            auto [it, fresh] = index.emplace(*instances[i].label, static_cast<int>(index.size()));
            out[i] = it->second;
        }
        return out;
    }
};

inline Corpus load_corpus(const std::string& path, const Tokenizer& tokenizer = whitespace_token_count) {
    Corpus corpus;
    std::unordered_set<int> seen;
    for_each_jsonl(path, [&](std::size_t lineno, const json& j) {
        const std::string where = path + ":" + std::to_string(lineno);
        if (!j.is_object() || !j.contains("id") || !j.contains("text"))
            throw ValidationError(where + ": record must carry \"id\" and \"text\"");
        if (!j["id"].is_number_integer())
            throw ValidationError(where + ": \"id\" must be an integer");
        TextInstance t;
        t.id = j["id"].get<int>();
        if (t.id < 0) throw ValidationError(where + ": negative id");
        if (!seen.insert(t.id).second)
            throw ValidationError(where + ": duplicate id " + std::to_string(t.id));
        if (!j["text"].is_string())
            throw ValidationError(where + ": \"text\" must be a string");
        t.text = j["text"].get<std::string>();
        if (j.contains("label") && !j["label"].is_null()) {
            const auto& lab = j["label"];
            if (lab.is_string())
                t.label = lab.get<std::string>();
            else if (lab.is_number_integer())
                t.label = std::to_string(lab.get<std::int64_t>());
            else
                throw ValidationError(where + ": \"label\" must be a string or integer");
        }
        if (j.contains("tokens") && !j["tokens"].is_null()) {
            if (!j["tokens"].is_number_integer() || j["tokens"].get<std::int64_t>() < 0)
                throw ValidationError(where + ": \"tokens\" must be a non-negative integer");
            t.token_count = j["tokens"].get<std::int64_t>();
        } else {
            t.token_count = tokenizer(t.text);
        }
        corpus.file_order.push_back(t.id);
        corpus.instances.push_back(std::move(t));
    });
    if (corpus.instances.empty()) throw ValidationError(path + ": empty corpus");
    const int n = corpus.size();
    for (int id : corpus.file_order)
        if (id >= n)
            throw ValidationError(path + ": ids are not dense 0.." + std::to_string(n - 1) +
                                  " (found id " + std::to_string(id) + ")");
    std::sort(corpus.instances.begin(), corpus.instances.end(),
              [](const TextInstance& a, const TextInstance& b) { return a.id < b.id; });
    return corpus;
}

/// Reads an embedding matrix. Files ending in .jsonl/.json/.ndjson hold one
/// JSON array of numbers per line; anything else is the binary layout:
/// two little-endian uint32 (rows, cols) followed by rows*cols little-endian
/// float32 values, row-major.
inline Eigen::MatrixXd load_embeddings(const std::string& path) {
    const auto dot = path.find_last_of('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    if (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") {
        std::vector<std::vector<double>> rows;
        for_each_jsonl(path, [&](std::size_t lineno, const json& j) {
            const std::string where = path + ":" + std::to_string(lineno);
            if (!j.is_array()) throw ValidationError(where + ": expected a JSON array");
            std::vector<double> row;
            row.reserve(j.size());
            for (const auto& v : j) {
                if (!v.is_number()) throw ValidationError(where + ": non-numeric component");
                row.push_back(v.get<double>());
            }
            if (!rows.empty() && row.size() != rows.front().size())
                throw ValidationError(where + ": inconsistent dimension " +
                                      std::to_string(row.size()) + " vs " +
                                      std::to_string(rows.front().size()));
            rows.push_back(std::move(row));
        });
        if (rows.empty()) throw ValidationError(path + ": empty embedding file");
        Eigen::MatrixXd m(rows.size(), rows.front().size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t k = 0; k < rows[i].size(); ++k) m(i, k) = rows[i][k];
        return m;
    }

    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file: " + path);
    std::uint32_t n = 0, d = 0;
    in.read(reinterpret_cast<char*>(&n), 4);
    in.read(reinterpret_cast<char*>(&d), 4);
    if (!in || n == 0 || d == 0)
        throw ValidationError(path + ": bad binary embedding header");
    std::vector<float> buf(static_cast<std::size_t>(n) * d);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
    if (!in || in.gcount() != static_cast<std::streamsize>(buf.size() * 4))
        throw ValidationError(path + ": truncated binary embedding payload");
    char extra;
    if (in.read(&extra, 1))
        throw ValidationError(path + ": trailing bytes after embedding payload");
    Eigen::MatrixXd m(n, d);
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t k = 0; k < d; ++k)
            m(i, k) = static_cast<double>(buf[static_cast<std::size_t>(i) * d + k]);
    return m;
}

/// Writes the binary layout accepted by load_embeddings.
inline void write_matrix_binary(const std::string& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open file for writing: " + path);
    const std::uint32_t n = static_cast<std::uint32_t>(m.rows());
    const std::uint32_t d = static_cast<std::uint32_t>(m.cols());
    out.write(reinterpret_cast<const char*>(&n), 4);
    out.write(reinterpret_cast<const char*>(&d), 4);
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t k = 0; k < d; ++k) {
            const float v = static_cast<float>(m(i, k));
            out.write(reinterpret_cast<const char*>(&v), 4);
        }
    out.close();
    if (out.fail()) throw ValidationError("write failed: " + path);
}

/// Scales every row to unit L2 norm. Rows are instances.
inline Eigen::MatrixXd normalize_embeddings(const Eigen::MatrixXd& raw) {
    Eigen::MatrixXd out = raw;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double norm = out.row(i).norm();
        if (norm < 1e-150)
            throw ValidationError("zero-norm embedding row for id " + std::to_string(i));
        out.row(i) /= norm;
    }
    return out;
}

/// Attaches unit-normalized embedding rows to a corpus, re-permuting from the
/// corpus file's record order into id order.
inline void attach_embeddings(Corpus& corpus, const Eigen::MatrixXd& raw) {
    if (raw.rows() != corpus.size())
        throw ValidationError("embedding rows (" + std::to_string(raw.rows()) +
                              ") do not match corpus size (" + std::to_string(corpus.size()) + ")");
    Eigen::MatrixXd by_id(raw.rows(), raw.cols());
    for (Eigen::Index line = 0; line < raw.rows(); ++line)
        by_id.row(corpus.file_order[static_cast<std::size_t>(line)]) = raw.row(line);
    corpus.embeddings = normalize_embeddings(by_id);
}

/// Pairwise similarity of two instances: dot product of unit embedding rows.
inline double ess(const Eigen::MatrixXd& embeddings, int a, int b) {
    return embeddings.row(a).dot(embeddings.row(b));
}

/// Per-instance degrees d(a) = x_a . sum_i x_i over unit embeddings, with the
/// quantities every downstream weight needs cached alongside.
struct DegreeProfile {
    static constexpr double kEps = 1e-12;

    Eigen::VectorXd raw_degrees;  // exact dot with the sum vector (may be <= 0)
    Eigen::VectorXd degrees;      // clamped to at least kEps
    Eigen::VectorXd sum_vector;   // sum of all embedding rows
    double inv_degree_sum = 0.0;  // sum_x 1/degrees[x]
    double degree_sum = 0.0;      // sum_x degrees[x]

    int size() const { return static_cast<int>(degrees.size()); }
};

inline DegreeProfile compute_degrees(const Eigen::MatrixXd& embeddings) {
    if (embeddings.rows() == 0) throw ValidationError("cannot compute degrees of empty matrix");
    DegreeProfile p;
    p.sum_vector = embeddings.colwise().sum().transpose();
    p.raw_degrees = embeddings * p.sum_vector;
    p.degrees = p.raw_degrees.cwiseMax(DegreeProfile::kEps);
    p.inv_degree_sum = p.degrees.cwiseInverse().sum();
    p.degree_sum = p.degrees.sum();
    return p;
}

}  // namespace cequel
