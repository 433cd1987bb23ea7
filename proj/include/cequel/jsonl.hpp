#pragma once

#include <fstream>
#include <functional>
#include <string>

#include <json.hpp>

#include "cequel/errors.hpp"

namespace cequel {

using json = nlohmann::json;

/// Calls fn(line_number, parsed_json) for every non-blank line of a
/// JSON-lines file. Line numbers are 1-based. Parse failures raise a
/// ValidationError naming the offending line.
inline void for_each_jsonl(const std::string& path,
                           const std::function<void(std::size_t, const json&)>& fn) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw ValidationError(path + ":" + std::to_string(lineno) + ": malformed JSON record");
        fn(lineno, j);
    }
}

class JsonlWriter {
public:
    explicit JsonlWriter(const std::string& path) : path_(path), out_(path, std::ios::trunc) {
        if (!out_) throw ValidationError("cannot open file for writing: " + path);
    }

    void write(const json& j) { out_ << j.dump() << "\n"; }

    void close() {
        out_.close();
        if (out_.fail()) throw ValidationError("write failed: " + path_);
    }

private:
    std::string path_;
    std::ofstream out_;
};

}  // namespace cequel
